"""Event-triggered LQG control loops sharing a contention-based network.

Public surface: plant descriptions and validation, Riccati gain synthesis,
local/remote estimation, triggering policies, the slotted contention
channel, closed-form cost and utility analysis, and the Monte Carlo
simulation engine.
"""

from .plants import PlantParams, PlantState, ValidationReport, validate_plant
from .riccati import (GainSet, RiccatiError, solve_control_riccati,
                      solve_filter_riccati, solve_gains, spectral_radius)
from .estimation import (ErrorTriple, LocalEstimator, RemoteEstimator,
                         compute_errors, kalman_step, remote_step)
from .scheduling import (CETT, PST, STETT, MixtureDiagnostic, SchedulerState,
                         SchedulingError, decide, lambda_from_probability,
                         make_scheduler, probability_from_lambda, propagate_psi)
from .network import (ABSTRACTED, FULL, NetworkConfig, SlotOutcome,
                      resolve_slot, resolve_slot_abstracted)
from .analysis import (UtilityConfig, closed_form_pst_cost,
                       empirical_cost_decomposition, mss_check,
                       priority_coefficients, success_probabilities,
                       utility_optimal_probabilities)
from .simulator import (ExperimentConfig, GainResult, LoopSpec, SimResult,
                        SweepRow, performance_gain, run_episode,
                        run_episode_reference, run_monte_carlo, sweep_grid)

__version__ = "0.1.0"
