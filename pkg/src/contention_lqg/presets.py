"""Built-in experiment presets.

``paper-example`` is the scalar benchmark loop used throughout the test
suite and the reproduction command: A=0.9, B=1, C=1.5, W=1, V=1.5, Q=1,
R=0.1, evaluated on the abstracted channel over p in {0.1,...,0.9} and
q in {0.5, 1.0} with T=1e5 slots and 10 Monte Carlo runs.
"""
from __future__ import annotations

PAPER_EXAMPLE = "paper-example"

PRESET_TEXTS = {
    PAPER_EXAMPLE: """\
# Scalar benchmark loop on the abstracted contention channel.
master_seed = 0
horizon = 100000
runs = 10
record_level = "costs"

[network]
mode = "abstracted"
q = 1.0

[[loop]]
policy = "pst"
p = 0.5
init = "zero"
A = 0.9
B = 1.0
C = 1.5
W = 1.0
V = 1.5
Q = 1.0
R = 0.1

[sweep]
grid_p = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
grid_q = [0.5, 1.0]
policies = ["pst", "cett"]
""",
}


def preset_text(name: str) -> str:
    """Return the configuration text of a named preset."""
    try:
        return PRESET_TEXTS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: "
                       f"{sorted(PRESET_TEXTS)}") from None
