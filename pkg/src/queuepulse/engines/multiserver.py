"""
G/G/m recursion with completion epochs C_k (arrival order) and departure
epochs D_k (time order):

    C_k = (A_k v D_{k-m}) + tau_k
    D_k = min over k-subsets of {C_1..C_{k+m-2}} of the subset max, then min with C_{k+m-1}

The min over k-subsets of a subset maximum is the k-th smallest element; for
a prefix of k+m-2 completions that is its (m-1)-th largest, kept in a
size-(m-1) min-heap. Completions past the last customer count as +inf.
"""
import heapq
import math
from itertools import combinations
from typing import Any, List, Optional, Sequence

from queuepulse import config
from queuepulse.engines.base import BaseEngine, Trace, check_durations, check_horizon
from queuepulse.engines.registry import registry
from queuepulse.schemas.models import GGmSpec
from queuepulse.types import DomainError, EnumerationGuardError, SamplePath


def ggm_recursion(servers: int, interarrivals: Sequence[Any], services: Sequence[Any], horizon: int):
    arrivals: List[Any] = []
    completions: List[Any] = []
    departures: List[Any] = []
    # min-heap of the (m-1) largest completions of the current prefix
    largest: List[Any] = []
    keep = servers - 1
    a = 0.0

    def complete(j: int):
        # C_j for 0-based j reads D_{j-m} (1-based), i.e. departures[j - m]
        nonlocal a
        a = a + interarrivals[j]
        arrivals.append(a)
        ready = max(a, departures[j - servers]) if j >= servers else max(a, 0.0)
        completions.append(ready + services[j])

    def window_push(idx: int):
        c = completions[idx] if idx < horizon else math.inf
        if len(largest) < keep:
            heapq.heappush(largest, c)
        elif largest[0] < c:
            heapq.heapreplace(largest, c)

    for j in range(min(servers, horizon)):
        complete(j)
    # C_1..C_{m-2} precede the first window step
    for idx in range(servers - 2):
        window_push(idx)

    for k in range(1, horizon + 1):
        if keep:
            window_push(k + servers - 3)
        kth = largest[0] if keep else math.inf
        tail = completions[k + servers - 2] if k + servers - 2 < horizon else math.inf
        departures.append(min(kth, tail))
        nxt = k + servers - 1
        if nxt < horizon:
            complete(nxt)

    return arrivals, completions, departures


def departure_bruteforce(completions: Sequence[float], servers: int, k: int, guard: Optional[int] = None) -> float:
    """
    Literal evaluation of the departure formula for the k-th departure by
    enumerating every k-subset of C_1..C_{k+m-2}. Absent completions are +inf.
    """
    if servers < 1:
        raise DomainError(f"Server count must be >= 1, got {servers}")
    guard = config.BRUTEFORCE_GUARD if guard is None else guard
    pool = k + servers - 2
    count = math.comb(pool, k) if pool >= k else 0
    if count * k > guard:
        raise EnumerationGuardError(
            f"Enumerating {count} subsets of size {k} exceeds the guard {guard}",
            details={"subsets": count, "k": k, "guard": guard},
        )
    values = [float(c) for c in completions]

    def c_at(i: int) -> float:
        return values[i - 1] if i <= len(values) else math.inf

    best = math.inf
    for subset in combinations(range(1, pool + 1), k):
        best = min(best, max(c_at(i) for i in subset))
    return min(best, c_at(k + servers - 1))


def simulate_ggm(spec: GGmSpec, interarrivals: Sequence[float], services: Sequence[float], horizon: int) -> SamplePath:
    if spec.servers < 1:
        raise DomainError(f"Server count must be >= 1, got {spec.servers}")
    horizon = check_horizon(horizon)
    alpha = check_durations(interarrivals, horizon, "interarrival")
    tau = check_durations(services, horizon, "service")
    arrivals, completions, departures = ggm_recursion(spec.servers, alpha, tau, horizon)
    return SamplePath.from_lists([arrivals], [departures], horizon=horizon, completions=completions)


@registry.register("ggm")
class GGmEngine(BaseEngine):
    def recurse(self, model, durations, horizon) -> Trace:
        arrivals, completions, departures = ggm_recursion(
            model.servers, durations["interarrival"], durations["service"], horizon
        )
        return [arrivals], [departures], completions
