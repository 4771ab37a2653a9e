from queuepulse.stochastic.distributions import sample_durations, sample_durations_with_tangent, sample_inputs
from queuepulse.stochastic.estimation import (
    antithetic_estimate,
    crn_difference,
    estimate_finite_horizon,
    estimate_steady_state,
    sweep,
)
from queuepulse.stochastic.streams import RandomStream, substream_id

__all__ = [
    "RandomStream",
    "substream_id",
    "sample_durations",
    "sample_durations_with_tangent",
    "sample_inputs",
    "estimate_finite_horizon",
    "estimate_steady_state",
    "antithetic_estimate",
    "crn_difference",
    "sweep",
]
