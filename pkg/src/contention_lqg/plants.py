"""Stochastic LTI loop: parameter validation and true-state propagation.

A loop is defined by the tuple (A, B, C, W, V, Q, R): state transition,
input, output, process-noise covariance, measurement-noise covariance and
the two quadratic cost weights.  All matrices are stored as float64 2-D
arrays; scalars are accepted and promoted.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Rank tests use singular values; desk-scale systems sit far from this boundary.
RANK_RTOL = 1e-9
_SYM_TOL = 1e-9


def _as_matrix(value, name: str) -> np.ndarray:
    m = np.atleast_2d(np.asarray(value, dtype=float))
    if m.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got ndim={m.ndim}")
    return np.ascontiguousarray(m)


def _check_shape(m: np.ndarray, shape, name: str, against: str) -> None:
    if m.shape != shape:
        raise ValueError(
            f"dimension mismatch between {name} {m.shape} and {against} "
            f"(expected {name} to be {shape[0]}x{shape[1]})"
        )


@dataclass(frozen=True, eq=False)
class PlantParams:
    """Immutable definition of one control loop."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    W: np.ndarray
    V: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        names = ["A", "B", "C", "W", "V", "Q", "R"]
        for name in names:
            object.__setattr__(self, name, _as_matrix(getattr(self, name), name))
        n = self.A.shape[0]
        if self.A.shape[1] != n:
            raise ValueError(f"dimension mismatch: A must be square, got {self.A.shape}")
        _check_shape(self.B, (n, self.B.shape[1]), "B", "A")
        _check_shape(self.C, (self.C.shape[0], n), "C", "A")
        _check_shape(self.W, (n, n), "W", "A")
        _check_shape(self.V, (self.n_outputs, self.n_outputs), "V", "C")
        _check_shape(self.Q, (n, n), "Q", "A")
        _check_shape(self.R, (self.n_inputs, self.n_inputs), "R", "B")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]


@dataclass
class PlantState:
    """True state of one loop at time step k."""

    x: np.ndarray
    k: int = 0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(-1)


@dataclass
class ValidationReport:
    ok: bool
    failures: list = field(default_factory=list)


def _is_symmetric(m: np.ndarray) -> bool:
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    return bool(np.abs(m - m.T).max(initial=0.0) <= _SYM_TOL * scale)


def _min_eig(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (m + m.T)).min())


def controllability_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def observability_matrix(A: np.ndarray, C: np.ndarray) -> np.ndarray:
    return controllability_matrix(A.T, C.T).T


def _has_full_rank(m: np.ndarray, rank: int) -> bool:
    s = np.linalg.svd(m, compute_uv=False)
    if s.size < rank or s[0] == 0.0:
        return False
    return bool(s[rank - 1] / s[0] > RANK_RTOL)


def matrix_sqrt_psd(m: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root, with tiny negative eigenvalues clipped."""
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def covariance_factor(m: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Factor F with F @ F.T equal to the covariance (to 1e-12).

    Cholesky when the matrix is numerically PD, eigendecomposition as a
    fallback.  Raises for matrices that are not positive definite.
    """
    m = 0.5 * (np.asarray(m, dtype=float) + np.asarray(m, dtype=float).T)
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(m)
    if vals.min() <= -tol * max(1.0, vals.max(initial=0.0)):
        raise ValueError("covariance matrix is not positive definite")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def validate_plant(params: PlantParams) -> ValidationReport:
    """Check definiteness and controllability/observability requirements."""
    failures = []
    if not _is_symmetric(params.W):
        failures.append("W is not symmetric")
    elif _min_eig(params.W) <= 0.0:
        failures.append("W is not positive definite")
    if not _is_symmetric(params.V):
        failures.append("V is not symmetric")
    elif _min_eig(params.V) <= 0.0:
        failures.append("V is not positive definite")
    if not _is_symmetric(params.Q):
        failures.append("Q is not symmetric")
    elif _min_eig(params.Q) < -_SYM_TOL:
        failures.append("Q is not positive semi-definite")
    if not _is_symmetric(params.R):
        failures.append("R is not symmetric")
    elif _min_eig(params.R) <= 0.0:
        failures.append("R is not positive definite")
    n = params.n
    if not _has_full_rank(controllability_matrix(params.A, params.B), n):
        failures.append("(A, B) is not controllable")
    if not _has_full_rank(observability_matrix(params.A, params.C), n):
        failures.append("(A, C) is not observable")
    if not _has_full_rank(observability_matrix(params.A, matrix_sqrt_psd(params.Q)), n):
        failures.append("(A, Q^(1/2)) is not observable")
    return ValidationReport(ok=not failures, failures=failures)


def step_plant(state: PlantState, params: PlantParams, u, w) -> PlantState:
    """Advance the true state one slot: x' = A x + B u + w."""
    u = np.asarray(u, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float).reshape(-1)
    if u.size != params.n_inputs:
        raise ValueError(f"dimension mismatch between u (len {u.size}) and B {params.B.shape}")
    if w.size != params.n:
        raise ValueError(f"dimension mismatch between w (len {w.size}) and A {params.A.shape}")
    x_next = params.A @ state.x + params.B @ u + w
    return PlantState(x=x_next, k=state.k + 1)


def sample_noise(params: PlantParams, rng: np.random.Generator):
    """Draw one (process, measurement) noise pair: w ~ N(0, W), v ~ N(0, V)."""
    fw = covariance_factor(params.W)
    fv = covariance_factor(params.V)
    w = fw @ rng.standard_normal(params.n)
    v = fv @ rng.standard_normal(params.n_outputs)
    return w, v


def sample_initial_state(gains, rng: np.random.Generator) -> PlantState:
    """Draw x0 from the stationary filtered distribution N(0, Theta)."""
    f = covariance_factor(gains.Theta)
    return PlantState(x=f @ rng.standard_normal(f.shape[0]), k=0)
