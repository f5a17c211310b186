"""Closed-form results: stability test, cost series, utility-optimal rates.

The closed-form cost for the Bernoulli policy is a geometric series in the
per-slot failure probability; it converges exactly when the mean-square
stability condition holds.  Cost estimation from simulation uses the
variance-reduced decomposition tr(P W) + average of the Y-weighted squared
remote estimation error, which removes the tr(P W) noise floor from policy
comparisons.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .plants import PlantParams
from .riccati import GainSet, spectral_radius

SERIES_TOL = 1e-12
SERIES_MAX_TERMS = 10**6


@dataclass(frozen=True)
class UtilityConfig:
    """Priorities and blend weights for network utility tuning."""

    c: np.ndarray
    alpha: np.ndarray = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        if np.any(c <= 0.0):
            raise ValueError("priorities c must all be positive")
        object.__setattr__(self, "c", c)
        if self.alpha is not None:
            a = np.asarray(self.alpha, dtype=float).reshape(-1)
            if np.any((a < 0.0) | (a > 1.0)):
                raise ValueError("alpha weights must be in [0, 1]")
            object.__setattr__(self, "alpha", a)


def mss_check(params: PlantParams, p: float, q: float) -> bool:
    """Mean-square stability: sqrt(1 - q p) * spectral_radius(A) < 1."""
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError("probabilities must be in [0, 1]")
    return bool(np.sqrt(1.0 - q * p) * spectral_radius(params.A) < 1.0)


def closed_form_pst_cost(params: PlantParams, gains: GainSet, p: float, q: float,
                         tol: float = SERIES_TOL) -> float:
    """Closed-form average quadratic cost under Bernoulli(p) triggering.

    tr(P W) plus the geometric series over slots since the last success;
    terms are summed until the current term drops below tol times the
    partial sum (hard cap 10^6 terms).
    """
    if not mss_check(params, p, q):
        raise ValueError("cost diverges: mean-square stability condition fails")
    A, W = params.A, params.W
    Theta, Y, P = gains.Theta, gains.Y, gains.P
    eta = q * p
    fail = 1.0 - eta
    total = float(np.trace(P @ W))
    Mw = W.copy()       # A^j W A^j'
    Mt = Theta.copy()   # A^j Theta A^j'
    geo = 1.0           # (1 - eta)^j
    for _ in range(SERIES_MAX_TERMS):
        term = fail * geo * float(np.trace(Mw @ Y)) + eta * geo * float(np.trace(Mt @ Y))
        total += term
        if term < tol * total:
            break
        geo *= fail
        if geo == 0.0:
            break
        Mw = A @ Mw @ A.T
        Mt = A @ Mt @ A.T
    return total


def empirical_cost_decomposition(e_bar, gains: GainSet, W: np.ndarray = None,
                                 params: PlantParams = None) -> float:
    """Cost estimate from a recorded remote-error trace.

    tr(P W) + (1/T) sum of e_bar' Y e_bar over the trace.
    """
    if W is None:
        if params is None:
            raise ValueError("either W or params must be given")
        W = params.W
    e = np.asarray(e_bar, dtype=float)
    if e.ndim == 1:
        e = e[:, None]
    quad = np.einsum("ti,ij,tj->t", e, gains.Y, e)
    return float(np.trace(gains.P @ W)) + float(quad.mean())


def utility_optimal_probabilities(cfg: UtilityConfig) -> np.ndarray:
    """Proportional-fairness optimum: p*_i = c_i / sum(c)."""
    return cfg.c / cfg.c.sum()


def priority_coefficients(params_list, gains_list, alpha) -> np.ndarray:
    """Performance-based priorities blending the two cost-series traces.

    c_i = alpha_i tr(A W A' Y) + (1 - alpha_i) tr(A Theta A' Y).
    Equal priorities (a vector of ones) correspond to throughput-optimal
    rates p* = 1/m.
    """
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (len(params_list),))
    out = np.empty(len(params_list))
    for i, (params, gains) in enumerate(zip(params_list, gains_list)):
        A, W = params.A, params.W
        tw = float(np.trace(A @ W @ A.T @ gains.Y))
        tt = float(np.trace(A @ gains.Theta @ A.T @ gains.Y))
        out[i] = alpha[i] * tw + (1.0 - alpha[i]) * tt
    return out


def equal_priorities(m: int) -> np.ndarray:
    return np.ones(m)


def success_probabilities(p_vec) -> np.ndarray:
    """Per-loop success probability eta_i = p_i prod_{j != i} (1 - p_j)."""
    p = np.asarray(p_vec, dtype=float).reshape(-1)
    out = np.empty_like(p)
    for i in range(p.size):
        others = np.delete(p, i)
        out[i] = p[i] * np.prod(1.0 - others)
    return out


def log_utility_total(c, p_vec) -> float:
    """Aggregate weighted log utility sum c_i log(eta_i) at the given rates."""
    c = np.asarray(c, dtype=float).reshape(-1)
    eta = success_probabilities(p_vec)
    if np.any(eta <= 0.0):
        return -np.inf
    return float(np.sum(c * np.log(eta)))


def social_pst_cost(params_list, gains_list, p_vec) -> float:
    """Sum of closed-form costs over all loops at the given constant rates.

    Diagnostic only; the joint minimization over rates is non-convex and is
    not attempted here.
    """
    p = np.asarray(p_vec, dtype=float).reshape(-1)
    total = 0.0
    for i, (params, gains) in enumerate(zip(params_list, gains_list)):
        q_i = float(np.prod(1.0 - np.delete(p, i)))
        total += closed_form_pst_cost(params, gains, p[i], q_i)
    return total
