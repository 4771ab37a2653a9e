"""
Single-server recursions: the G/G/1 queue, open tandems (unbounded buffers,
manufacturing and communication blocking) and closed tandems.

Every departure epoch is a max of earlier epochs plus a service time. Terms
whose customer index falls at or below zero are dropped from the maxima
instead of being carried as minus infinity; D_0 is anchored at time zero.
"""
from typing import Any, List, Mapping, Sequence

import numpy as np
from loguru import logger

from queuepulse.engines.base import BaseEngine, Trace, check_durations, check_horizon
from queuepulse.engines.registry import registry
from queuepulse.schemas.models import ClosedTandemSpec, TandemSpec
from queuepulse.types import UNBOUNDED, Blocking, DeadlockError, InputLengthError, SamplePath


def gg1_recursion(interarrivals: Sequence[Any], services: Sequence[Any], horizon: int):
    """A_k = A_{k-1} + alpha_k, D_k = (A_k v D_{k-1}) + tau_k with A_0 = D_0 = 0."""
    arrivals, departures = [], []
    a = d = 0.0
    for k in range(horizon):
        a = a + interarrivals[k]
        d = max(a, d) + services[k]
        arrivals.append(a)
        departures.append(d)
    return arrivals, departures


def tandem_recursion(spec: TandemSpec, interarrivals: Sequence[Any], services: Sequence[Sequence[Any]], horizon: int):
    """
    Customer-major sweep over an open tandem.

    Row k only reads rows < k and nodes < n of row k: the downstream term
    D^{n+1}_{k-B-1} always has index at most k-1.
    """
    n_nodes = spec.node_count
    blocking = None if spec.all_unbounded else spec.blocking
    # lag[n] = B_{n+2} + 1 for the downstream neighbour of 0-based node n, None when unbounded
    lag: List[Any] = []
    for n in range(n_nodes):
        b = spec.buffer(n + 2) if n + 1 < n_nodes else UNBOUNDED
        lag.append(None if b == UNBOUNDED else b + 1)

    arrivals: List[Any] = []
    departures: List[List[Any]] = [[] for _ in range(n_nodes)]
    a = 0.0
    for k in range(horizon):
        a = a + interarrivals[k]
        arrivals.append(a)
        upstream = a
        for n in range(n_nodes):
            own = departures[n]
            ready = max(upstream, own[k - 1]) if k else max(upstream, 0.0)
            j = k - lag[n] if lag[n] is not None else -1
            if blocking is Blocking.COMMUNICATION and j >= 0:
                d = max(ready, departures[n + 1][j]) + services[n][k]
            elif blocking is Blocking.MANUFACTURING and j >= 0:
                d = max(ready + services[n][k], departures[n + 1][j])
            else:
                d = ready + services[n][k]
            own.append(d)
            upstream = d

    node_arrivals = [arrivals] + [list(departures[n]) for n in range(n_nodes - 1)]
    return node_arrivals, departures


def closed_tandem_order(spec: ClosedTandemSpec) -> List[int]:
    """
    0-based evaluation order within a row.

    A node with K_n = 0 reads its predecessor's departure from the same row, so
    the sweep starts at a populated node and runs cyclically from there.
    """
    populated = [n for n, p in enumerate(spec.populations) if p > 0]
    if not populated:
        raise DeadlockError("Closed tandem has no customers", nodes=range(1, spec.node_count + 1))
    start = populated[0]
    return [(start + i) % spec.node_count for i in range(spec.node_count)]


def closed_tandem_recursion(spec: ClosedTandemSpec, services: Sequence[Sequence[Any]], horizon: int):
    """D^n_k = (D^{n-1}_{k-K_n} v D^n_{k-1}) + tau^n_k with node N feeding node 1."""
    n_nodes = spec.node_count
    order = closed_tandem_order(spec)
    pops = spec.populations
    departures: List[List[Any]] = [[] for _ in range(n_nodes)]
    arrivals: List[List[Any]] = [[] for _ in range(n_nodes)]
    for k in range(horizon):
        for n in order:
            pred = departures[(n - 1) % n_nodes]
            own = departures[n]
            prev = own[k - 1] if k else 0.0
            j = k - pops[n]
            if j >= 0:
                arrival = pred[j]
                d = max(arrival, prev) + services[n][k]
            else:
                arrival = 0.0
                d = prev + services[n][k]
            arrivals[n].append(arrival)
            own.append(d)
    return arrivals, departures


def lindley_waiting_times(interarrivals: Sequence[float], services: Sequence[float], horizon: int) -> np.ndarray:
    """Classical waiting-time form of the G/G/1 queue: W_1 = 0, W_k = max(0, W_{k-1} + tau_{k-1} - alpha_k)."""
    horizon = check_horizon(horizon)
    alpha = check_durations(interarrivals, horizon, "interarrival")
    tau = check_durations(services, horizon, "service")
    waits = [0.0]
    for k in range(1, horizon):
        waits.append(max(0.0, waits[-1] + tau[k - 1] - alpha[k]))
    return np.asarray(waits)


# --- Public API ---

def simulate_gg1(interarrivals: Sequence[float], services: Sequence[float], horizon: int) -> SamplePath:
    horizon = check_horizon(horizon)
    alpha = check_durations(interarrivals, horizon, "interarrival")
    tau = check_durations(services, horizon, "service")
    arrivals, departures = gg1_recursion(alpha, tau, horizon)
    return SamplePath.from_lists([arrivals], [departures], horizon=horizon)


def simulate_open_tandem(
    spec: TandemSpec,
    interarrivals: Sequence[float],
    services: Sequence[Sequence[float]],
    horizon: int,
) -> SamplePath:
    horizon = check_horizon(horizon)
    alpha = check_durations(interarrivals, horizon, "interarrival")
    taus = _node_services(services, spec.node_count, horizon)
    logger.debug(f"Open tandem N={spec.node_count} K={horizon} buffers={spec.buffers or 'unbounded'}")
    arrivals, departures = tandem_recursion(spec, alpha, taus, horizon)
    return SamplePath.from_lists(arrivals, departures, horizon=horizon)


def simulate_closed_tandem(spec: ClosedTandemSpec, services: Sequence[Sequence[float]], horizon: int) -> SamplePath:
    horizon = check_horizon(horizon)
    taus = _node_services(services, spec.node_count, horizon)
    arrivals, departures = closed_tandem_recursion(spec, taus, horizon)
    return SamplePath.from_lists(arrivals, departures, horizon=horizon)


def _node_services(services: Sequence[Sequence[float]], n_nodes: int, horizon: int) -> List[List[float]]:
    if len(services) < n_nodes:
        raise InputLengthError(f"Expected {n_nodes} service sequences, got {len(services)}")
    return [check_durations(services[n], horizon, f"service.{n + 1}") for n in range(n_nodes)]


def _service_roles(durations: Mapping[str, Sequence[Any]], n_nodes: int) -> List[Sequence[Any]]:
    return [durations[f"service.{n}"] for n in range(1, n_nodes + 1)]


# --- Registered engines ---

@registry.register("gg1")
class GG1Engine(BaseEngine):
    def recurse(self, model, durations, horizon) -> Trace:
        arrivals, departures = gg1_recursion(durations["interarrival"], durations["service"], horizon)
        return [arrivals], [departures], None


@registry.register("tandem")
@registry.register("blocking_tandem")
class TandemEngine(BaseEngine):
    def recurse(self, model, durations, horizon) -> Trace:
        arrivals, departures = tandem_recursion(
            model, durations["interarrival"], _service_roles(durations, model.node_count), horizon
        )
        return arrivals, departures, None


@registry.register("closed_tandem")
class ClosedTandemEngine(BaseEngine):
    def recurse(self, model, durations, horizon) -> Trace:
        arrivals, departures = closed_tandem_recursion(model, _service_roles(durations, model.node_count), horizon)
        return arrivals, departures, None
