"""
Closed networks of single-server FCFS nodes with deterministic routing.

    D^n_k = (A^n_k v D^n_{k-1}) + tau^n_k
    A^n_k = 0 for k <= K_n, else the (k - K_n)-th smallest epoch routed to n

The equations are mutually recursive across nodes, so they are evaluated in
chronological order: each step commits the earliest next departure among the
nodes whose next arrival epoch is already fixed. Every departure committed
later is at least as large, so an order statistic consumed at or below the
committed time can no longer change.
"""
import bisect
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Any, List, Optional, Sequence, Union

from loguru import logger

from queuepulse import config
from queuepulse.engines.base import BaseEngine, Trace, check_durations, check_horizon
from queuepulse.engines.registry import registry
from queuepulse.schemas.models import ClosedTandemSpec, NetworkSpec, RouteRule, RoutingPlan, TandemSpec
from queuepulse.types import (
    UNBOUNDED,
    DeadlockError,
    EnumerationGuardError,
    HorizonError,
    InputLengthError,
    SamplePath,
    UnsupportedError,
)


class _Network:
    """Mutable evaluation state of one network run."""

    def __init__(self, spec: NetworkSpec, services: Sequence[Sequence[Any]], horizons: Sequence[int]):
        self.spec = spec
        self.services = services
        self.horizons = list(horizons)
        n_nodes = spec.node_count
        for n, rule in enumerate(spec.routing.routes):
            if not rule.covers(self.horizons[n]):
                raise InputLengthError(
                    f"Route list of node {n + 1} has {len(rule.sequence)} targets, horizon needs {self.horizons[n]}"
                )
        # routed[n] is the sorted multiset of epochs routed to node n so far
        self.routed: List[List[Any]] = [[] for _ in range(n_nodes)]
        self.arrivals: List[List[Any]] = [[] for _ in range(n_nodes)]
        self.departures: List[List[Any]] = [[] for _ in range(n_nodes)]

    def next_arrival(self, n: int) -> Optional[Any]:
        """A^n_k for the next service at node n, or None while it is not yet determined."""
        k = len(self.departures[n]) + 1
        pop = self.spec.populations[n]
        if pop == UNBOUNDED or k <= pop:
            return 0.0
        j = k - pop
        routed = self.routed[n]
        return routed[j - 1] if len(routed) >= j else None

    def ready(self, n: int) -> Optional[Any]:
        a = self.next_arrival(n)
        if a is None:
            return None
        own = self.departures[n]
        return max(a, own[-1]) if own else max(a, 0.0)

    def exhausted(self, n: int) -> bool:
        return len(self.departures[n]) >= len(self.services[n])

    def unmet(self) -> List[int]:
        return [n for n in range(self.spec.node_count) if len(self.departures[n]) < self.horizons[n]]

    def could_disturb(self, target: Optional[int], lower: Any) -> bool:
        """
        Whether a departure no earlier than ``lower`` routed to ``target``
        (0-based, None when unknown) could change an order statistic that the
        target needs to reach its horizon.
        """
        nodes = range(self.spec.node_count) if target is None else [target]
        for t in nodes:
            pop = self.spec.populations[t]
            if pop == UNBOUNDED:
                continue
            needed = self.horizons[t] - pop
            if needed <= 0:
                continue
            routed = self.routed[t]
            if len(routed) < needed or lower < routed[needed - 1]:
                return True
        return False

    def step(self) -> None:
        best_node, best_arrival, best_departure = None, None, None
        for n in range(self.spec.node_count):
            if self.exhausted(n):
                continue
            a = self.next_arrival(n)
            if a is None:
                continue
            own = self.departures[n]
            d = (max(a, own[-1]) if own else max(a, 0.0)) + self.services[n][len(own)]
            # strict comparison keeps the lowest node index on ties
            if best_node is None or d < best_departure:
                best_node, best_arrival, best_departure = n, a, d

        for n in range(self.spec.node_count):
            if not self.exhausted(n):
                continue
            lower = self.ready(n)
            if lower is None or (best_node is not None and not lower < best_departure):
                continue
            k = len(self.departures[n]) + 1
            target = self.spec.routing.target(n + 1, k)
            if self.could_disturb(None if target is None else target - 1, lower):
                raise HorizonError(
                    f"Node {n + 1} ran out of service times after {k - 1} departures, "
                    f"but its next departure may be needed elsewhere",
                    details={"node": n + 1, "departures": k - 1},
                )

        if best_node is None:
            unmet = [n + 1 for n in self.unmet()]
            raise DeadlockError(f"No node can produce its next departure; unmet nodes {unmet}", nodes=unmet)

        n = best_node
        k = len(self.departures[n]) + 1
        target = self.spec.routing.target(n + 1, k)
        if target is None:
            raise InputLengthError(f"Routing of node {n + 1} does not cover departure {k}")
        self.arrivals[n].append(best_arrival)
        self.departures[n].append(best_departure)
        bisect.insort(self.routed[target - 1], best_departure)

    def run(self) -> None:
        while self.unmet():
            self.step()


def network_recursion(spec: NetworkSpec, services: Sequence[Sequence[Any]], horizons: Sequence[int]):
    state = _Network(spec, services, horizons)
    state.run()
    return state.arrivals, state.departures


def arrival_epoch_bruteforce(departures: Sequence[float], k: int, guard: Optional[int] = None) -> float:
    """Minimum over all k-subsets of the routed multiset of the subset maximum."""
    values = [float(d) for d in departures]
    if k < 1 or len(values) < k:
        raise InputLengthError(f"Need at least {k} routed departures, got {len(values)}")
    guard = config.BRUTEFORCE_GUARD if guard is None else guard
    count = math.comb(len(values), k)
    if count > guard:
        raise EnumerationGuardError(
            f"Enumerating {count} subsets exceeds the guard {guard}",
            details={"subsets": count, "k": k, "guard": guard},
        )
    return min(max(subset) for subset in combinations(values, k))


def network_residual(spec: NetworkSpec, path: SamplePath, services: Sequence[Sequence[float]]) -> float:
    """
    Largest absolute residual of the network equations recomputed from a
    finished path. Arrival epochs are checked against the order statistics of
    the departures routed to each node; missing statistics count as +inf.
    """
    n_nodes = spec.node_count
    routed: List[List[float]] = [[] for _ in range(n_nodes)]
    for n in range(n_nodes):
        for k, d in enumerate(path.departures[n], start=1):
            target = spec.routing.target(n + 1, k)
            if target is not None:
                routed[target - 1].append(float(d))
    for r in routed:
        r.sort()

    worst = 0.0
    for n in range(n_nodes):
        pop = spec.populations[n]
        prev = 0.0
        for k, (a, d) in enumerate(zip(path.arrivals[n], path.departures[n]), start=1):
            if pop == UNBOUNDED or k <= pop:
                expected = 0.0
            else:
                j = k - pop
                expected = routed[n][j - 1] if len(routed[n]) >= j else math.inf
            worst = max(worst, abs(a - expected), abs(d - (max(a, prev) + services[n][k - 1])))
            prev = d
    return worst


def simulate_network(spec: NetworkSpec, services: Sequence[Sequence[float]], horizons: Union[int, Sequence[int]]) -> SamplePath:
    """
    Evaluate the network until node n has produced ``horizons[n]`` departures.

    Service sequences may be longer than the horizons; departures computed past
    a node's target are exact and kept in the returned path.
    """
    horizons = _node_horizons(spec, horizons)
    if len(services) < spec.node_count:
        raise InputLengthError(f"Expected {spec.node_count} service sequences, got {len(services)}")
    taus = [check_durations(services[n], horizons[n], f"service.{n + 1}", truncate=False) for n in range(spec.node_count)]
    arrivals, departures = network_recursion(spec, taus, horizons)
    logger.debug(f"Network N={spec.node_count} produced {[len(d) for d in departures]} departures")
    return SamplePath.from_lists(arrivals, departures, horizon=max(horizons), horizons=horizons)


def _node_horizons(spec: NetworkSpec, horizons: Union[int, Sequence[int]]) -> List[int]:
    if isinstance(horizons, int):
        horizons = [horizons] * spec.node_count
    if len(horizons) != spec.node_count:
        raise InputLengthError(f"Expected {spec.node_count} horizons, got {len(horizons)}")
    return [check_horizon(h) for h in horizons]


# --- Tandem encodings ---

@dataclass(frozen=True)
class NetworkEncoding:
    """A network equivalent of a tandem; ``node_map[i]`` is the network node (1-based) of tandem node i+1."""
    network: NetworkSpec
    services: List[List[float]]
    horizons: List[int]
    node_map: List[int]


def tandem_as_network(
    spec: Union[TandemSpec, ClosedTandemSpec],
    interarrivals: Optional[Sequence[float]] = None,
    services: Optional[Sequence[Sequence[float]]] = None,
    horizon: Optional[int] = None,
) -> NetworkEncoding:
    """
    Encode a tandem as a deterministic-routing network.

    Open tandems gain a source node 1 with an unbounded population whose
    service times are the interarrival gaps; the last tandem node routes back
    to the source, where arrivals are never served. Closed tandems map to the
    cyclic network with the same populations.
    """
    services = [] if services is None else [list(map(float, s)) for s in services]
    if isinstance(spec, ClosedTandemSpec):
        if not any(spec.populations):
            raise DeadlockError("Closed tandem has no customers", nodes=range(1, spec.node_count + 1))
        network = NetworkSpec(
            node_count=spec.node_count,
            populations=list(spec.populations),
            routing=RoutingPlan.cyclic(spec.node_count),
        )
        node_map = list(range(1, spec.node_count + 1))
    else:
        if not spec.all_unbounded:
            raise UnsupportedError("Only tandems with unbounded buffers map onto networks",
                                   details={"buffers": spec.buffers})
        n_nodes = spec.node_count + 1
        routes = [RouteRule(sequence=[2 if n_nodes > 1 else 1])]
        routes += [RouteRule(sequence=[n + 2 if n + 2 <= n_nodes else 1]) for n in range(1, n_nodes)]
        network = NetworkSpec(
            node_count=n_nodes,
            populations=[UNBOUNDED] + [0] * spec.node_count,
            routing=RoutingPlan(node_count=n_nodes, routes=routes),
        )
        gaps = [] if interarrivals is None else list(map(float, interarrivals))
        services = [gaps] + services
        node_map = list(range(2, n_nodes + 1))

    if horizon is None:
        horizon = min((len(s) for s in services), default=1)
    return NetworkEncoding(
        network=network,
        services=services,
        horizons=[horizon] * network.node_count,
        node_map=node_map,
    )


@registry.register("network")
class NetworkEngine(BaseEngine):
    truncate_inputs = False

    def required_lengths(self, model, horizon):
        horizons = _node_horizons(model, horizon)
        return {f"service.{n}": horizons[n - 1] for n in range(1, model.node_count + 1)}

    def recurse(self, model, durations, horizon) -> Trace:
        horizons = _node_horizons(model, horizon)
        services = [durations[f"service.{n}"] for n in range(1, model.node_count + 1)]
        arrivals, departures = network_recursion(model, services, horizons)
        return arrivals, departures, None
