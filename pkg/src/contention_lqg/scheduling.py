"""Triggering policies: purely stochastic, stochastic-threshold, combined.

Three policies share one state object:

* ``pst``   -- Bernoulli(p) draws, independent of all plant signals.
* ``stett`` -- trigger when half the Psi-normalized squared prediction
  error exceeds an exponential random threshold with rate lambda; the
  rate is calibrated so the trigger probability equals p whenever the
  tracked covariance Psi is correct.
* ``cett``  -- stochastic-threshold triggering from each success until the
  first collision, then Bernoulli(p) until the next success.

The exponential threshold uses the rate convention Pr(r > t) = exp(-l t).
Every decision consumes exactly one uniform draw from the scheduler's own
stream, so decision sequences are reproducible regardless of which branch
is taken.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .riccati import GainSet
from .plants import PlantParams

PST = "pst"
STETT = "stett"
CETT = "cett"
POLICIES = (PST, STETT, CETT)

EVENT = "event"
FALLBACK = "fallback"


class SchedulingError(RuntimeError):
    pass


def lambda_from_probability(p: float, n: int) -> float:
    """Threshold rate giving trigger probability p for an n-dimensional loop."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"p must be in [0, 1) for threshold triggering, got {p}")
    if n < 1:
        raise ValueError("state dimension must be >= 1")
    return (1.0 - p) ** (-2.0 / n) - 1.0


def probability_from_lambda(lam: float, n: int) -> float:
    """Exact inverse of lambda_from_probability."""
    if lam < 0.0:
        raise ValueError("lambda must be nonnegative")
    return 1.0 - (1.0 + lam) ** (-n / 2.0)


@dataclass
class MixtureDiagnostic:
    """Signed two-Gaussian mixture moment after a collision."""

    M: np.ndarray
    weights: tuple  # (1/p, -(1-p)/p); sums to the mixture normalization


@dataclass
class SchedulerState:
    """Per-loop triggering machinery for one episode."""

    policy: str
    p: float
    A: np.ndarray
    Phi: np.ndarray
    rng: np.random.Generator
    lam: float = None
    mode: str = EVENT
    Psi: np.ndarray = None

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {self.p}")
        n = self.A.shape[0]
        if self.lam is None:
            if self.policy == PST:
                self.lam = 0.0
            else:
                self.lam = lambda_from_probability(self.p, n)
        if self.Psi is None:
            self.Psi = self.Phi.copy()

    @property
    def n(self) -> int:
        return self.A.shape[0]


def make_scheduler(policy: str, p: float, params: PlantParams, gains: GainSet,
                   rng: np.random.Generator) -> SchedulerState:
    return SchedulerState(policy=policy, p=p, A=params.A, Phi=gains.Phi, rng=rng)


def pst_decide(state: SchedulerState) -> bool:
    """Bernoulli(p) decision from the scheduler's own stream."""
    return bool(state.rng.random() < state.p)


def stett_decide(state: SchedulerState, e_pred) -> bool:
    """Threshold decision: half the Psi-normalized squared error vs. Exp(lam)."""
    if state.mode != EVENT:
        raise SchedulingError("threshold triggering requires event mode")
    e = np.asarray(e_pred, dtype=float).reshape(-1)
    u = state.rng.random()
    if state.lam <= 0.0:
        # threshold almost surely infinite; draw consumed to keep streams aligned
        return False
    try:
        z = np.linalg.solve(state.Psi, e)
    except np.linalg.LinAlgError as exc:
        raise SchedulingError("singular Psi covariance") from exc
    qf = 0.5 * float(e @ z)
    r = -np.log1p(-u) / state.lam
    return qf > r


def cett_decide(state: SchedulerState, e_pred) -> bool:
    """Threshold branch in event mode, Bernoulli branch after a collision."""
    if state.mode == EVENT:
        return stett_decide(state, e_pred)
    return pst_decide(state)


def decide(state: SchedulerState, e_pred) -> bool:
    """Dispatch one slot decision for the state's policy."""
    if state.policy == PST:
        return pst_decide(state)
    if state.policy == STETT:
        return stett_decide(state, e_pred)
    return cett_decide(state, e_pred)


def propagate_psi(state: SchedulerState, delta: bool, rho: bool, sigma: bool):
    """Advance the tracked covariance and mode after one slot outcome.

    Returns a MixtureDiagnostic on a collision in event mode, else None.
    On success Psi resets to Phi and the scheduler re-enters event mode.
    In fallback mode Psi is frozen (decisions there ignore it).
    """
    if state.policy == PST:
        return None
    A, Phi = state.A, state.Phi
    if sigma:
        state.Psi = Phi.copy()
        state.mode = EVENT
        return None
    if state.mode != EVENT:
        return None
    if not delta:
        state.Psi = A @ state.Psi @ A.T / (1.0 + state.lam) + Phi
        return None
    if not rho:  # collision: triggered into a busy slot
        psi_full = A @ state.Psi @ A.T + Phi
        psi_hat = A @ state.Psi @ A.T / (1.0 + state.lam) + Phi
        p = state.p
        diag = MixtureDiagnostic(
            M=psi_full / p - (1.0 - p) / p * psi_hat,
            weights=(1.0 / p, -(1.0 - p) / p),
        )
        if state.policy == STETT:
            raise SchedulingError(
                "pure threshold triggering is undefined after a collision; "
                "use the combined policy"
            )
        state.mode = FALLBACK
        return diag
    # delta and rho both set means sigma, handled above
    return None
