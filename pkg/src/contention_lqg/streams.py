"""Counter-based random streams for reproducible, order-independent episodes.

Every consumer of randomness gets its own Philox stream keyed by
(master_seed, run, loop, purpose).  Episodes can therefore execute in any
order, serially or in parallel, and reproduce bit-identically.  Scheduler
streams are additionally keyed by policy so that comparing two policies
under common random numbers shares the plant-noise and channel streams but
not the schedulers' internal draws.
"""
from __future__ import annotations

import numpy as np

_PURPOSE_IDS = {
    "process": 0,
    "measurement": 1,
    "channel": 2,
    "init": 3,
    "scheduler_pst": 10,
    "scheduler_stett": 11,
    "scheduler_cett": 12,
}


def stream(master_seed: int, run: int, loop: int, purpose: str) -> np.random.Generator:
    """Return the dedicated generator for one (run, loop, purpose) triple."""
    try:
        pid = _PURPOSE_IDS[purpose]
    except KeyError:
        raise ValueError(f"unknown stream purpose {purpose!r}") from None
    ss = np.random.SeedSequence(master_seed, spawn_key=(run, loop, pid))
    return np.random.Generator(np.random.Philox(ss))


def scheduler_purpose(policy: str) -> str:
    return f"scheduler_{policy}"
