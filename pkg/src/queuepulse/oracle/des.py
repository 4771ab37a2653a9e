"""
Event-scheduling simulator used to cross-check the recursion engines.

Every model kind is mapped onto a set of FCFS stations with m servers,
a capacity counting the customers in service, queued or held on a server,
and a blocking rule. A ``heapq`` future-event list carries external
arrivals and service completions; service starts and releases of blocked
customers are resolved at the current clock until no station can change.
"""
import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Deque, Dict, List, Mapping, Optional, Sequence

import numpy as np
from loguru import logger

from queuepulse import config
from queuepulse.types import (
    UNBOUNDED,
    Blocking,
    DeadlockError,
    DomainError,
    HorizonError,
    InputLengthError,
    OracleMismatchError,
    SamplePath,
)


class EventKind(IntEnum):
    ARRIVAL = 0
    SERVICE_START = 1
    SERVICE_END = 2
    UNBLOCK = 3


@dataclass(frozen=True, order=True)
class EventRecord:
    time: float
    node: int
    customer: int
    kind: EventKind


@dataclass
class _Customer:
    ident: int
    arrived: float = 0.0


@dataclass
class _Station:
    node: int
    servers: int
    capacity: float
    services: List[float]
    limit: int
    backlog: bool = False
    queue: Deque[_Customer] = field(default_factory=deque)
    held: Deque[_Customer] = field(default_factory=deque)
    busy: int = 0
    started: int = 0
    arrivals: List[float] = field(default_factory=list)
    departures: List[float] = field(default_factory=list)

    @property
    def occupancy(self) -> int:
        return len(self.queue) + self.busy

    def has_room(self) -> bool:
        return self.backlog or self.occupancy < self.capacity

    def has_work(self) -> bool:
        return self.started < self.limit and (self.backlog or bool(self.queue))


class _Simulator:
    def __init__(
        self,
        stations: List[_Station],
        route: Callable[[int, int], Optional[int]],
        blocking: Optional[Blocking] = None,
        interarrivals: Optional[Sequence[float]] = None,
        trace: Optional[List[EventRecord]] = None,
    ):
        self.stations = stations
        self.route = route
        self.blocking = blocking
        self.interarrivals = interarrivals
        self.trace = trace
        self.events: List[EventRecord] = []
        self.clock = 0.0
        self.next_ident = 0
        self.pending: Dict[int, _Customer] = {}
        self.completions: Dict[int, float] = {}
        self.external = 0

    def _new_customer(self, arrived: float) -> _Customer:
        customer = _Customer(self.next_ident, arrived)
        self.next_ident += 1
        return customer

    def _log(self, node: int, customer: int, kind: EventKind) -> None:
        if self.trace is not None:
            self.trace.append(EventRecord(self.clock, node, customer, kind))

    def _schedule_arrival(self, previous: float) -> None:
        if self.interarrivals is None or self.external >= len(self.interarrivals):
            return
        time = previous + self.interarrivals[self.external]
        customer = self._new_customer(time)
        heapq.heappush(self.events, EventRecord(time, 1, customer.ident, EventKind.ARRIVAL))
        self.pending[customer.ident] = customer
        self.external += 1

    def _deliver(self, target: Optional[int], customer: _Customer) -> None:
        if target is None:
            return
        station = self.stations[target - 1]
        if station.backlog:
            return
        customer.arrived = self.clock
        station.queue.append(customer)

    def _target(self, station: _Station) -> Optional[int]:
        return self.route(station.node, len(station.departures) + 1)

    def _release(self, station: _Station) -> bool:
        """Move held customers downstream while there is room; True if any moved."""
        moved = False
        while station.held:
            target = self._target(station)
            if target is not None and not self.stations[target - 1].has_room():
                break
            customer = station.held.popleft()
            station.departures.append(self.clock)
            station.busy -= 1
            self._log(station.node, customer.ident, EventKind.UNBLOCK)
            self._deliver(target, customer)
            moved = True
        return moved

    def _start(self, station: _Station) -> bool:
        started = False
        while station.busy < station.servers and station.has_work():
            if self.blocking is Blocking.COMMUNICATION:
                target = self.route(station.node, station.started + 1)
                if target is not None and not self.stations[target - 1].has_room():
                    break
            customer = station.queue.popleft() if station.queue else self._new_customer(0.0)
            station.arrivals.append(customer.arrived)
            tau = station.services[station.started]
            station.started += 1
            station.busy += 1
            self.pending[customer.ident] = customer
            self._log(station.node, customer.ident, EventKind.SERVICE_START)
            heapq.heappush(self.events, EventRecord(self.clock + tau, station.node, customer.ident, EventKind.SERVICE_END))
            started = True
        return started

    def _settle(self) -> None:
        changed = True
        while changed:
            changed = False
            for station in self.stations:
                changed |= self._release(station)
                changed |= self._start(station)

    def run(self) -> None:
        self._schedule_arrival(0.0)
        self._settle()
        while self.events:
            event = heapq.heappop(self.events)
            self.clock = event.time
            customer = self.pending.pop(event.customer)
            self._log(event.node, event.customer, event.kind)
            station = self.stations[event.node - 1]
            if event.kind is EventKind.ARRIVAL:
                self._deliver(1, customer)
                self._schedule_arrival(event.time)
            else:
                self.completions[customer.ident] = event.time
                # the customer keeps its server until released
                station.held.append(customer)
            self._settle()


# --- Model mapping ---

def _sequence(durations: Mapping[str, Sequence[float]], role: str, count: Optional[int]) -> List[float]:
    seq = durations.get(role)
    if seq is None:
        raise InputLengthError(f"Missing duration sequence '{role}'")
    values = [float(x) for x in seq]
    if count is not None:
        if len(values) < count:
            raise InputLengthError(f"Sequence '{role}' has {len(values)} items, horizon needs {count}")
        values = values[:count]
    if any(not math.isfinite(x) or x < 0 for x in values):
        raise DomainError(f"Sequence '{role}' must hold finite nonnegative durations")
    return values


def _per_node(model, horizon) -> List[int]:
    if isinstance(horizon, (list, tuple)):
        return [int(h) for h in horizon]
    return [int(horizon)] * getattr(model, "node_count", 1)


def des_simulate(
    model,
    durations: Mapping[str, Sequence[float]],
    horizon,
    trace: Optional[List[EventRecord]] = None,
) -> SamplePath:
    """Simulate ``model`` by event scheduling on the same inputs the recursion engines take."""
    kind = model.kind
    horizons = _per_node(model, horizon)
    if any(h < 1 for h in horizons):
        raise DomainError(f"Horizon must be positive, got {horizon}")
    k = horizons[0]
    interarrivals = None
    blocking = None

    if kind in ("gg1", "ggm"):
        servers = getattr(model, "servers", 1)
        if servers < 1:
            raise DomainError(f"Server count must be >= 1, got {servers}")
        interarrivals = _sequence(durations, "interarrival", k)
        stations = [_Station(1, servers, math.inf, _sequence(durations, "service", k), k)]

        def route(node, index):
            return None

    elif kind in ("tandem", "blocking_tandem"):
        interarrivals = _sequence(durations, "interarrival", k)
        n_nodes = model.node_count
        buffers = model.buffers or [UNBOUNDED] * (n_nodes - 1)
        capacities = [math.inf] + [math.inf if b == UNBOUNDED else b + 1 for b in buffers]
        stations = [
            _Station(n, 1, capacities[n - 1], _sequence(durations, f"service.{n}", k), k)
            for n in range(1, n_nodes + 1)
        ]
        blocking = None if all(b == UNBOUNDED for b in buffers) else Blocking(model.blocking)

        def route(node, index):
            return node + 1 if node < n_nodes else None

    elif kind == "closed_tandem":
        n_nodes = model.node_count
        if not any(model.populations):
            raise DeadlockError("Closed tandem has no customers", nodes=range(1, n_nodes + 1))
        stations = [
            _Station(n, 1, math.inf, _sequence(durations, f"service.{n}", k), k)
            for n in range(1, n_nodes + 1)
        ]

        def route(node, index):
            return node % n_nodes + 1

    elif kind == "network":
        n_nodes = model.node_count
        stations = []
        for n in range(1, n_nodes + 1):
            services = _sequence(durations, f"service.{n}", None)
            if len(services) < horizons[n - 1]:
                raise InputLengthError(f"Sequence 'service.{n}' has {len(services)} items, horizon needs {horizons[n - 1]}")
            stations.append(_Station(n, 1, math.inf, services, len(services),
                                     backlog=model.populations[n - 1] == UNBOUNDED))

        def route(node, index):
            return model.routing.target(node, index)

    else:
        raise DomainError(f"Unknown model kind '{kind}'")

    sim = _Simulator(stations, route, blocking=blocking, interarrivals=interarrivals, trace=trace)
    for station in stations:
        initial = model.populations[station.node - 1] if kind in ("closed_tandem", "network") else 0
        if not station.backlog:
            for _ in range(initial):
                station.queue.append(sim._new_customer(0.0))
    sim.run()

    unmet = [s.node for s in stations if len(s.departures) < horizons[s.node - 1]]
    if unmet:
        if any(s.started >= s.limit and (s.queue or s.backlog) for s in stations):
            raise HorizonError(f"Service times ran out before nodes {unmet} reached their horizons",
                               details={"nodes": unmet})
        raise DeadlockError(f"Event list drained with unmet nodes {unmet}", nodes=unmet)

    logger.debug(f"Oracle finished '{kind}' at t={sim.clock:.6g} after {sim.next_ident} customers")
    completions = None
    if kind == "ggm":
        completions = [sim.completions[i] for i in sorted(sim.completions)]
    return SamplePath.from_lists(
        [s.arrivals for s in stations],
        [s.departures for s in stations],
        horizon=max(horizons),
        completions=completions,
        horizons=tuple(horizons) if isinstance(horizon, (list, tuple)) else None,
    )


def validate_against_oracle(model, durations: Mapping[str, Sequence[float]], horizon, tolerance: Optional[float] = None) -> float:
    """
    Run the recursion engine and the oracle on the same inputs and return the
    largest absolute epoch difference over each node's horizon.
    """
    # imported here so the oracle module itself stays independent of the engines
    from queuepulse.engines import simulate
    from queuepulse.engines.network import network_residual

    tolerance = config.ORACLE_TOLERANCE if tolerance is None else tolerance
    engine_path = simulate(model, durations, horizon)
    oracle_path = des_simulate(model, durations, horizon)
    horizons = _per_node(model, horizon)

    worst = 0.0
    for n in range(engine_path.node_count):
        k = horizons[n]
        for mine, theirs in ((engine_path.departures[n], oracle_path.departures[n]),
                             (engine_path.arrivals[n], oracle_path.arrivals[n])):
            worst = max(worst, float(np.max(np.abs(mine[:k] - theirs[:k]))))
    if engine_path.completions is not None:
        worst = max(worst, float(np.max(np.abs(engine_path.completions - oracle_path.completions))))
    if model.kind == "network":
        services = [durations[f"service.{n}"] for n in range(1, model.node_count + 1)]
        worst = max(worst, network_residual(model, engine_path, services))

    if worst > tolerance:
        raise OracleMismatchError(
            f"Engine and oracle disagree by {worst:.3g} on '{model.kind}' (tolerance {tolerance:.3g})",
            details={"kind": model.kind, "difference": worst, "tolerance": tolerance},
        )
    logger.debug(f"Oracle agreement on '{model.kind}': max difference {worst:.3g}")
    return worst
