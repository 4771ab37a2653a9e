"""
Infinitesimal perturbation analysis.

Durations become ``TangentEpoch`` values carrying d(value)/d(theta). The
recursion engines only add, compare and pick operands, so running them on
tangent epochs yields every output epoch together with its pathwise
derivative: addition adds tangents, max and min hand over the tangent of
the operand they select. Builtin ``max``/``min`` keep the left operand on
equal values; such comparisons are counted when the tangents differ.
"""
import contextvars
from dataclasses import dataclass
from functools import partial
from typing import Any, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from queuepulse.engines import get_engine
from queuepulse.engines.base import check_durations
from queuepulse.metrics import PER_CUSTOMER, customer_series, evaluate_measure, node_horizon, node_services
from queuepulse.schemas.experiment import Estimate, MeasureSelector, StochasticModel
from queuepulse.stochastic.distributions import sample_inputs
from queuepulse.stochastic.estimation import (
    Selectors,
    _check_replications,
    _unwrap,
    as_selectors,
    replicate_measures,
    run_replications,
    summarize,
)
from queuepulse.types import DomainError, SamplePath

_tie_log: contextvars.ContextVar[Optional["TieLog"]] = contextvars.ContextVar("tie_log", default=None)


class TieLog:
    """Counts value ties between operands with different tangents inside a ``with`` block."""

    def __init__(self):
        self.count = 0
        self._token = None

    def __enter__(self) -> "TieLog":
        self._token = _tie_log.set(self)
        return self

    def __exit__(self, *exc):
        _tie_log.reset(self._token)
        return False


def _parts(x: Any) -> Tuple[float, float]:
    if isinstance(x, TangentEpoch):
        return x.value, x.tangent
    return float(x), 0.0


class TangentEpoch:
    __slots__ = ("value", "tangent")

    def __init__(self, value: float, tangent: float = 0.0):
        self.value = float(value)
        self.tangent = float(tangent)

    def __add__(self, other):
        value, tangent = _parts(other)
        return TangentEpoch(self.value + value, self.tangent + tangent)

    __radd__ = __add__

    def _compare(self, other) -> float:
        value, tangent = _parts(other)
        if value == self.value and tangent != self.tangent:
            log = _tie_log.get()
            if log is not None:
                log.count += 1
        return value

    def __lt__(self, other):
        return self.value < self._compare(other)

    def __le__(self, other):
        return self.value <= self._compare(other)

    def __gt__(self, other):
        return self.value > self._compare(other)

    def __ge__(self, other):
        return self.value >= self._compare(other)

    def __float__(self):
        return self.value

    def __repr__(self):
        return f"TangentEpoch({self.value!r}, {self.tangent!r})"


@dataclass(frozen=True)
class TangentPath:
    """Epoch values of a path and their derivatives, laid out alike."""
    values: SamplePath
    tangents: SamplePath
    ties: int = 0


def _split(seqs) -> Tuple[List[List[float]], List[List[float]]]:
    values = [[_parts(x)[0] for x in seq] for seq in seqs]
    tangents = [[_parts(x)[1] for x in seq] for seq in seqs]
    return values, tangents


def propagate_tangents(
    model,
    durations: Mapping[str, Sequence[float]],
    tangents: Mapping[str, Sequence[float]],
    horizon,
) -> TangentPath:
    """Run the engine of ``model.kind`` on durations carrying d(tau)/d(theta)."""
    engine = get_engine(model.kind)
    inputs = {}
    for role, length in engine.required_lengths(model, horizon).items():
        values = check_durations(durations.get(role), length, role, truncate=engine.truncate_inputs)
        slopes = tangents.get(role)
        slopes = [0.0] * len(values) if slopes is None else [float(t) for t in slopes[:len(values)]]
        if len(slopes) < len(values):
            raise DomainError(f"Tangents of '{role}' are shorter than its durations")
        inputs[role] = [TangentEpoch(v, t) for v, t in zip(values, slopes)]

    with TieLog() as log:
        arrivals, departures, completions = engine.recurse(model, inputs, horizon)

    a_val, a_tan = _split(arrivals)
    d_val, d_tan = _split(departures)
    c_val = c_tan = None
    if completions is not None:
        (c_val,), (c_tan,) = _split([completions])
    horizons = None if np.isscalar(horizon) else tuple(horizon)
    scalar = int(horizon) if np.isscalar(horizon) else int(max(horizon))
    if log.count:
        logger.warning(f"{log.count} tie(s) met while propagating tangents through '{model.kind}'")
    return TangentPath(
        values=SamplePath.from_lists(a_val, d_val, scalar, completions=c_val, horizons=horizons),
        tangents=SamplePath.from_lists(a_tan, d_tan, scalar, completions=c_tan, horizons=horizons),
        ties=log.count,
    )


def measure_derivative(
    model,
    path: TangentPath,
    durations: Mapping[str, Sequence[float]],
    tangents: Mapping[str, Sequence[float]],
    selector: MeasureSelector,
    horizon: Optional[int] = None,
) -> Tuple[float, float]:
    """(value, d value / d theta) of one sample measure."""
    value = evaluate_measure(model, path.values, durations, selector, horizon)
    slopes = {role: np.zeros(len(durations[role])) if tangents.get(role) is None else tangents[role]
              for role in durations}

    if selector.system:
        k = path.values.horizon if horizon is None else int(horizon)
    else:
        k = node_horizon(path.values, selector.node, horizon)

    if selector.name in ("S", "W"):
        # both are linear in the epochs and durations
        return value, float(np.mean(customer_series(model, path.tangents, slopes, selector, k)))

    node = selector.node
    if selector.name == "I":
        a = path.values.node_arrivals(node)[:k]
        d = path.values.node_departures(node)[:k]
        da = path.tangents.node_arrivals(node)[:k]
        dd = path.tangents.node_departures(node)[:k]
        dtau = np.asarray(node_services(model, slopes, node), dtype=float)[:k]
        prev = np.concatenate(([0.0], d[:-1]))
        dprev = np.concatenate(([0.0], dd[:-1]))
        dstart = np.where(a >= prev, da, dprev)
        return value, float(np.mean(dd - dstart - dtau))

    holding = customer_series(model, path.values, durations, MeasureSelector(name="S", node=node), k)
    dholding = customer_series(model, path.tangents, slopes, MeasureSelector(name="S", node=node), k)
    tau = np.asarray(node_services(model, durations, node), dtype=float)[:k]
    dtau = np.asarray(node_services(model, slopes, node), dtype=float)[:k]
    span = path.values.node_departures(node)[k - 1]
    dspan = path.tangents.node_departures(node)[k - 1]
    numerators = {
        "T": (float(k), 0.0),
        "U": (tau.sum(), dtau.sum()),
        "U_per_server": (tau.sum(), dtau.sum()),
        "J": (holding.sum(), dholding.sum()),
        "Q": ((holding - tau).sum(), (dholding - dtau).sum()),
    }
    num, dnum = numerators[selector.name]
    derivative = (dnum * span - num * dspan) / span ** 2
    if selector.name == "U_per_server":
        derivative /= getattr(model, "servers", 1)
    return value, float(derivative)


# --- Estimators ---

def _ipa_task(stochastic, selectors, theta, horizon, seed, coordinate, replication):
    durations, tangents = sample_inputs(stochastic, theta, seed, replication, horizon, coordinate=coordinate)
    path = propagate_tangents(stochastic.model, durations, tangents, horizon)
    scalar = None if isinstance(horizon, (list, tuple)) else horizon
    derivatives = [
        measure_derivative(stochastic.model, path, durations, tangents, s, scalar)[1] for s in selectors
    ]
    return derivatives, path.ties


def ipa_gradient(
    stochastic: StochasticModel,
    selectors: Selectors,
    theta: Sequence[float],
    horizon,
    replications: int,
    coordinate: int = 0,
    seed: int = 0,
    workers: Optional[int] = None,
):
    """Monte Carlo average of pathwise derivatives d F_K / d theta[coordinate]."""
    _check_replications(replications)
    if not 0 <= coordinate < len(theta):
        raise DomainError(f"coordinate {coordinate} is outside theta of size {len(theta)}")
    chosen = as_selectors(selectors)
    task = partial(_ipa_task, stochastic, chosen, list(theta), horizon, seed, coordinate)
    rows = run_replications(task, replications, workers)
    ties = sum(t for _, t in rows)
    if ties:
        logger.warning(f"IPA met {ties} tie(s) over {replications} replications; left operands were kept")
    estimates = [
        summarize(f"d{s.label}/dtheta{coordinate}", [row[i] for row, _ in rows], seed=seed, theta=theta, ties=ties)
        for i, s in enumerate(chosen)
    ]
    return _unwrap(selectors, estimates)


def ipa_gradient_vector(
    stochastic: StochasticModel,
    selectors: Selectors,
    theta: Sequence[float],
    horizon,
    replications: int,
    seed: int = 0,
    workers: Optional[int] = None,
) -> List:
    """One forward pass per theta coordinate."""
    return [
        ipa_gradient(stochastic, selectors, theta, horizon, replications, coordinate=i, seed=seed, workers=workers)
        for i in range(len(theta))
    ]


def _fd_task(stochastic, selectors, theta, horizon, seed, coordinate, h, replication):
    up = list(theta)
    down = list(theta)
    up[coordinate] += h
    down[coordinate] -= h
    plus = replicate_measures(stochastic, selectors, up, horizon, seed, replication)
    minus = replicate_measures(stochastic, selectors, down, horizon, seed, replication)
    return [(p - m) / (2.0 * h) for p, m in zip(plus, minus)]


def fd_gradient(
    stochastic: StochasticModel,
    selectors: Selectors,
    theta: Sequence[float],
    h: float,
    horizon,
    replications: int,
    coordinate: int = 0,
    seed: int = 0,
    workers: Optional[int] = None,
):
    """Central differences (F(theta + h) - F(theta - h)) / 2h, both sides on the streams of replication r."""
    _check_replications(replications)
    if h <= 0:
        raise DomainError(f"Step h must be positive, got {h}")
    if not 0 <= coordinate < len(theta):
        raise DomainError(f"coordinate {coordinate} is outside theta of size {len(theta)}")
    for shifted in (h, -h):
        moved = list(theta)
        moved[coordinate] += shifted
        # raises DomainError when theta +- h leaves the admissible set
        sample_inputs(stochastic, moved, seed, 0, horizon)
    chosen = as_selectors(selectors)
    task = partial(_fd_task, stochastic, chosen, list(theta), horizon, seed, coordinate, float(h))
    rows = run_replications(task, replications, workers)
    estimates = [
        summarize(f"d{s.label}/dtheta{coordinate}", [row[i] for row in rows], seed=seed, theta=theta)
        for i, s in enumerate(chosen)
    ]
    return _unwrap(selectors, estimates)
