"""
Theta-parameterized duration sampling.

Inversion families map each underlying uniform u through a nondecreasing
transform, so replacing u by 1 - u yields the antithetic partner and larger
uniforms never shorten a duration. Tangents are d(duration)/d(theta_i) of the
coordinate ``i`` being differentiated, computed pathwise from the same draws.
"""
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from queuepulse import config
from queuepulse.schemas.experiment import DistributionSpec, StochasticModel
from queuepulse.stochastic.streams import RandomStream, substream_id
from queuepulse.types import DomainError, UnsupportedError


def _theta_value(theta: Sequence[float], index: int) -> float:
    if index >= len(theta):
        raise DomainError(f"theta has {len(theta)} coordinates, binding needs index {index}")
    return float(theta[index])


def _exponential(u: np.ndarray, rate: float) -> np.ndarray:
    return -np.log1p(-u) / rate


def _sample(
    spec: DistributionSpec,
    theta: Sequence[float],
    stream: RandomStream,
    count: int,
    antithetic: bool,
    coordinate: Optional[int],
) -> Tuple[np.ndarray, np.ndarray]:
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    if antithetic and not spec.invertible:
        raise UnsupportedError(f"Family '{spec.family}' is not inversion-sampled; antithetic pairing is undefined",
                               details={"family": spec.family})

    binding = spec.theta
    rate = spec.rate
    if binding and binding.mode == "rate":
        rate = _theta_value(theta, binding.index)
        if rate <= 0:
            raise DomainError(f"Rate parameter theta[{binding.index}] must be positive, got {rate}")

    def uniforms(n: int) -> np.ndarray:
        u = stream.uniforms(n)
        return 1.0 - u if antithetic else u

    family = spec.family
    if family == "constant":
        x = np.full(count, float(spec.value))
    elif family == "sequence":
        x = np.resize(np.asarray(spec.values, dtype=float), count)
    elif family == "exponential":
        x = _exponential(uniforms(count), rate)
    elif family == "uniform":
        x = spec.low + (spec.high - spec.low) * uniforms(count)
    elif family == "erlang":
        stages = int(spec.shape)
        x = _exponential(uniforms(count * stages).reshape(count, stages), rate).sum(axis=1)
    elif family == "gamma":
        x = stream.generator().standard_gamma(spec.shape, count) / rate
    else:
        raise DomainError(f"Unknown family '{family}'")

    tangent = np.zeros(count)
    if binding is None:
        values = x
    else:
        value = _theta_value(theta, binding.index)
        differentiated = coordinate is not None and coordinate == binding.index
        if binding.mode == "scale":
            if value < 0:
                raise DomainError(f"Scale parameter theta[{binding.index}] must be nonnegative, got {value}")
            values = value * x
            if differentiated:
                tangent = x.copy()
        elif binding.mode == "rate":
            values = x
            if differentiated:
                tangent = -x / value
        else:
            values = x + value
            if differentiated:
                tangent = np.ones(count)

    if np.any(values < 0):
        raise DomainError(f"Family '{family}' produced negative durations at theta={list(theta)}")
    return values, tangent


def sample_durations(
    spec: DistributionSpec,
    theta: Sequence[float],
    stream: RandomStream,
    count: int,
    antithetic: bool = False,
) -> np.ndarray:
    values, _ = _sample(spec, theta, stream, count, antithetic, coordinate=None)
    return values


def sample_durations_with_tangent(
    spec: DistributionSpec,
    theta: Sequence[float],
    stream: RandomStream,
    count: int,
    coordinate: int = 0,
    antithetic: bool = False,
) -> Tuple[np.ndarray, np.ndarray]:
    return _sample(spec, theta, stream, count, antithetic, coordinate=coordinate)


def role_lengths(model, horizon) -> Dict[str, int]:
    """Number of durations to draw per role; networks get slack past their targets."""
    if model.kind == "network":
        horizons = horizon if isinstance(horizon, (list, tuple)) else [horizon] * model.node_count
        return {f"service.{n}": int(h) * config.NETWORK_SERVICE_FACTOR for n, h in enumerate(horizons, start=1)}
    return {role: int(horizon) for role in model.duration_roles()}


def sample_inputs(
    stochastic: StochasticModel,
    theta: Sequence[float],
    seed: int,
    replication: int,
    horizon,
    antithetic: bool = False,
    coordinate: Optional[int] = None,
) -> Tuple[Dict[str, np.ndarray], Dict[str, np.ndarray]]:
    """
    Durations (and tangents when ``coordinate`` is given) for every role of one
    replication. Role ``i`` of replication ``r`` always reads stream
    ``substream_id(r, i)``, so equal (seed, r) replays the same uniforms at
    any theta.
    """
    durations: Dict[str, np.ndarray] = {}
    tangents: Dict[str, np.ndarray] = {}
    lengths: Mapping[str, int] = role_lengths(stochastic.model, horizon)
    for index, role in enumerate(stochastic.roles()):
        stream = RandomStream(seed, substream_id(replication, index))
        spec = stochastic.distribution_for(role)
        values, tangent = _sample(spec, theta, stream, lengths[role], antithetic, coordinate)
        durations[role] = values
        tangents[role] = tangent
    return durations, tangents
