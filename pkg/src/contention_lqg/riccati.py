"""Steady-state gains: control Riccati, filter Riccati, and auxiliaries.

Fixed-point iteration is used for both Riccati equations; at desk scale
(n <= 10) convergence speed is irrelevant and the iteration is simple and
portable.  Each iterate is symmetrized to suppress drift.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .plants import PlantParams

ITERATION_TOL = 1e-12
RESIDUAL_TOL = 1e-9
MAX_ITERATIONS = 100_000


class RiccatiError(RuntimeError):
    """Fixed-point iteration failed to converge."""


@dataclass(frozen=True, eq=False)
class GainSet:
    """All derived steady-state matrices for one loop."""

    P: np.ndarray          # control Riccati solution
    K: np.ndarray          # feedback gain
    L: np.ndarray          # Kalman gain
    Theta_bar: np.ndarray  # predicted estimation-error covariance
    Theta: np.ndarray      # updated estimation-error covariance
    Phi: np.ndarray        # A Theta A' - Theta + W  (= Theta_bar - Theta)
    Y: np.ndarray          # K' (B' P B + R) K


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _rel_change(new: np.ndarray, old: np.ndarray) -> float:
    return float(np.linalg.norm(new - old) / max(1.0, np.linalg.norm(old)))


def spectral_radius(m: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvals(m)).max())


def solve_control_riccati(params: PlantParams, tol: float = ITERATION_TOL,
                          max_iter: int = MAX_ITERATIONS):
    """Iterate the control Riccati equation from P0 = Q; return (P, K)."""
    A, B, Q, R = params.A, params.B, params.Q, params.R
    P = Q.copy()
    for _ in range(max_iter):
        G = np.linalg.solve(B.T @ P @ B + R, B.T @ P @ A)
        P_next = _sym(A.T @ P @ A + Q - A.T @ P @ B @ G)
        if _rel_change(P_next, P) < tol:
            P = P_next
            break
        P = P_next
    else:
        raise RiccatiError("control Riccati iteration did not converge")
    K = -np.linalg.solve(B.T @ P @ B + R, B.T @ P @ A)
    return P, K


def solve_filter_riccati(params: PlantParams, tol: float = ITERATION_TOL,
                         max_iter: int = MAX_ITERATIONS):
    """Iterate the filter Riccati equation from Theta_bar0 = W.

    Returns (Theta_bar, Theta, L) with L the steady-state Kalman gain and
    Theta the updated error covariance.
    """
    A, C, W, V = params.A, params.C, params.W, params.V
    Tb = W.copy()
    for _ in range(max_iter):
        S = C @ Tb @ C.T + V
        gain = np.linalg.solve(S, C @ Tb).T  # Tb C' S^-1
        Tb_next = _sym(A @ (Tb - gain @ C @ Tb) @ A.T + W)
        if _rel_change(Tb_next, Tb) < tol:
            Tb = Tb_next
            break
        Tb = Tb_next
    else:
        raise RiccatiError("filter Riccati iteration did not converge")
    S = C @ Tb @ C.T + V
    L = np.linalg.solve(S, C @ Tb).T
    Theta = _sym(Tb - L @ S @ L.T)
    return Tb, Theta, L


def derive_auxiliary(params: PlantParams, P: np.ndarray, K: np.ndarray,
                     Theta: np.ndarray):
    """Return (Phi, Y): post-success error covariance and cost weight."""
    A, B, W, R = params.A, params.B, params.W, params.R
    Phi = _sym(A @ Theta @ A.T - Theta + W)
    Y = _sym(K.T @ (B.T @ P @ B + R) @ K)
    return Phi, Y


def control_riccati_residual(params: PlantParams, P: np.ndarray) -> float:
    A, B, Q, R = params.A, params.B, params.Q, params.R
    G = np.linalg.solve(B.T @ P @ B + R, B.T @ P @ A)
    res = A.T @ P @ A + Q - A.T @ P @ B @ G - P
    return float(np.linalg.norm(res) / max(1.0, np.linalg.norm(P)))


def filter_riccati_residual(params: PlantParams, Theta_bar: np.ndarray) -> float:
    A, C, W, V = params.A, params.C, params.W, params.V
    S = C @ Theta_bar @ C.T + V
    gain = np.linalg.solve(S, C @ Theta_bar).T
    res = A @ (Theta_bar - gain @ C @ Theta_bar) @ A.T + W - Theta_bar
    return float(np.linalg.norm(res) / max(1.0, np.linalg.norm(Theta_bar)))


def solve_gains(params: PlantParams) -> GainSet:
    """Solve both Riccati equations and assemble the full gain set.

    Verifies the fixed-point residuals and closed-loop/filter stability
    before returning.
    """
    P, K = solve_control_riccati(params)
    Theta_bar, Theta, L = solve_filter_riccati(params)
    Phi, Y = derive_auxiliary(params, P, K, Theta)
    if control_riccati_residual(params, P) > RESIDUAL_TOL:
        raise RiccatiError("control Riccati residual above tolerance")
    if filter_riccati_residual(params, Theta_bar) > RESIDUAL_TOL:
        raise RiccatiError("filter Riccati residual above tolerance")
    A, B, C = params.A, params.B, params.C
    if spectral_radius(A + B @ K) >= 1.0:
        raise RiccatiError("closed loop A + B K is not stable")
    if spectral_radius(A - A @ L @ C) >= 1.0:
        raise RiccatiError("filter loop A (I - L C) is not stable")
    return GainSet(P=P, K=K, L=L, Theta_bar=Theta_bar, Theta=Theta, Phi=Phi, Y=Y)
