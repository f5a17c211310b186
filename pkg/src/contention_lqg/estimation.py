"""Local Kalman filter, success-driven remote estimator, and error signals.

The local filter runs at its steady-state gain from step 0.  The remote
estimator holds the controller-side conditional mean: it adopts the
transmitted local estimate on a successful slot and otherwise keeps its
prediction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .plants import PlantParams
from .riccati import GainSet


@dataclass
class LocalEstimator:
    """Scheduler-side Kalman filter state (predicted and updated means)."""

    params: PlantParams
    gains: GainSet
    x_pred: np.ndarray = None
    x_upd: np.ndarray = None

    def __post_init__(self):
        n = self.params.n
        if self.x_pred is None:
            self.x_pred = np.zeros(n)
        self.x_pred = np.asarray(self.x_pred, dtype=float).reshape(n)
        if self.x_upd is None:
            self.x_upd = self.x_pred.copy()


@dataclass
class RemoteEstimator:
    """Controller-side estimator driven only by successful transmissions."""

    params: PlantParams
    x_pred: np.ndarray = None
    x_upd: np.ndarray = None

    def __post_init__(self):
        n = self.params.n
        if self.x_pred is None:
            self.x_pred = np.zeros(n)
        self.x_pred = np.asarray(self.x_pred, dtype=float).reshape(n)
        if self.x_upd is None:
            self.x_upd = self.x_pred.copy()


@dataclass
class ErrorTriple:
    """The three error signals read by scheduling and diagnostics."""

    e_pred: np.ndarray  # local updated estimate minus remote prediction
    e_hat: np.ndarray   # true state minus local updated estimate
    e_bar: np.ndarray   # true state minus remote updated estimate


def kalman_update(est: LocalEstimator, y) -> LocalEstimator:
    """Measurement update with the fixed steady-state gain."""
    y = np.asarray(y, dtype=float).reshape(-1)
    innov = y - est.params.C @ est.x_pred
    est.x_upd = est.x_pred + est.gains.L @ innov
    return est


def kalman_predict(est: LocalEstimator, u) -> LocalEstimator:
    """Time update with the applied input."""
    u = np.asarray(u, dtype=float).reshape(-1)
    est.x_pred = est.params.A @ est.x_upd + est.params.B @ u
    return est


def kalman_step(est: LocalEstimator, y, u_prev) -> LocalEstimator:
    """Predict with the previous input, then update with the measurement."""
    kalman_predict(est, u_prev)
    return kalman_update(est, y)


def remote_update(est: RemoteEstimator, sigma: bool, payload=None) -> RemoteEstimator:
    """Adopt the received local estimate on success, hold otherwise."""
    if bool(sigma) != (payload is not None):
        raise ValueError("protocol violation: payload must be present iff sigma=1")
    if sigma:
        est.x_upd = np.asarray(payload, dtype=float).reshape(-1).copy()
    else:
        est.x_upd = est.x_pred.copy()
    return est


def remote_predict(est: RemoteEstimator, u) -> RemoteEstimator:
    u = np.asarray(u, dtype=float).reshape(-1)
    est.x_pred = est.params.A @ est.x_upd + est.params.B @ u
    return est


def remote_step(est: RemoteEstimator, sigma: bool, payload, u) -> RemoteEstimator:
    """Update with the slot outcome, then predict with the applied input."""
    remote_update(est, sigma, payload)
    return remote_predict(est, u)


def compute_errors(x, local: LocalEstimator, remote: RemoteEstimator) -> ErrorTriple:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != local.x_upd.size or x.size != remote.x_upd.size:
        raise ValueError("dimension mismatch between state and estimator vectors")
    return ErrorTriple(
        e_pred=local.x_upd - remote.x_pred,
        e_hat=x - local.x_upd,
        e_bar=x - remote.x_upd,
    )
