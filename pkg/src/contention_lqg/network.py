"""Slotted contention channel: single-winner slots, same-slot ACK.

Two modes are supported.  ``full`` resolves a slot from the attempt bits
of all m loops: any simultaneous attempts collide and every colliding
payload is lost.  ``abstracted`` models a single loop against the rest of
the network as an i.i.d. Bernoulli(q) availability process.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FULL = "full"
ABSTRACTED = "abstracted"


@dataclass(frozen=True)
class NetworkConfig:
    mode: str = ABSTRACTED
    m: int = 1
    q: float = 1.0

    def __post_init__(self):
        if self.mode not in (FULL, ABSTRACTED):
            raise ValueError(f"unknown network mode {self.mode!r}")
        if self.mode == FULL and self.m < 1:
            raise ValueError("full mode requires m >= 1")
        if self.mode == ABSTRACTED and not 0.0 <= self.q <= 1.0:
            raise ValueError(f"availability q must be in [0, 1], got {self.q}")


@dataclass
class SlotOutcome:
    """Per-slot attempt / availability / success bits for all loops."""

    delta: np.ndarray
    rho: np.ndarray
    sigma: np.ndarray


def resolve_slot(delta) -> SlotOutcome:
    """Resolve one contention slot from the attempt bits of all loops."""
    delta = np.asarray(delta, dtype=bool)
    attempts = int(delta.sum())
    # rho_i: no other loop is attempting
    rho = np.full(delta.shape, attempts == 0, dtype=bool)
    rho[delta] = attempts == 1
    sigma = rho & delta
    assert int(sigma.sum()) <= 1
    return SlotOutcome(delta=delta, rho=rho, sigma=sigma)


def resolve_slot_abstracted(delta_i: bool, q: float, rng: np.random.Generator):
    """Single-loop slot against a Bernoulli(q) availability process.

    The availability draw is consumed every slot, independent of delta, so
    stream positions do not depend on the triggering pattern.
    """
    rho = bool(rng.random() < q)
    return rho, bool(rho and delta_i)
