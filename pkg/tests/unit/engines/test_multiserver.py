import numpy as np
import pytest

from queuepulse.engines.multiserver import departure_bruteforce, simulate_ggm
from queuepulse.engines.single_server import simulate_gg1
from queuepulse.schemas.models import GGmSpec
from queuepulse.types import EnumerationGuardError


def test_two_server_example():
    """A long first service is overtaken: C = (4, 3, 4), D = (3, 4, 4)."""
    path = simulate_ggm(GGmSpec(servers=2), [1.0, 1.0, 1.0], [3.0, 1.0, 1.0], 3)

    assert path.completions.tolist() == [4.0, 3.0, 4.0]
    assert path.node_departures(1).tolist() == [3.0, 4.0, 4.0]


def test_one_server_reduces_to_gg1(rng):
    for _ in range(50):
        horizon = int(rng.integers(1, 300))
        alpha = rng.exponential(1.0, horizon)
        tau = rng.exponential(0.9, horizon)

        multi = simulate_ggm(GGmSpec(servers=1), alpha, tau, horizon)
        single = simulate_gg1(alpha, tau, horizon)

        assert np.array_equal(multi.node_departures(1), single.node_departures(1))
        assert np.array_equal(multi.completions, single.node_departures(1))


def test_enough_servers_means_no_waiting(rng):
    """With m > K every customer starts on arrival; departures are the sorted completions."""
    alpha = rng.exponential(1.0, 4)
    tau = rng.exponential(3.0, 4)

    path = simulate_ggm(GGmSpec(servers=5), alpha, tau, 4)

    np.testing.assert_allclose(path.completions, np.cumsum(alpha) + tau)
    np.testing.assert_allclose(path.node_departures(1), np.sort(path.completions))


@pytest.mark.parametrize("servers", [2, 3, 4])
def test_heap_matches_subset_enumeration(servers, rng):
    """The running order statistic equals the literal min over k-subsets of the subset max."""
    horizon = 8
    alpha = rng.exponential(0.5, horizon)
    tau = rng.exponential(1.5, horizon)

    path = simulate_ggm(GGmSpec(servers=servers), alpha, tau, horizon)

    for k in range(1, horizon + 1):
        expected = departure_bruteforce(path.completions, servers, k)
        assert path.node_departures(1)[k - 1] == expected


@pytest.mark.parametrize("seed", range(100))
def test_random_completions_match_subset_enumeration(seed):
    """m in 1..4, K <= 10, continuous or tie-heavy integer durations."""
    rng = np.random.default_rng([31, seed])
    servers = int(rng.integers(1, 5))
    horizon = int(rng.integers(1, 11))
    if seed % 2:
        alpha = rng.integers(0, 3, horizon).astype(float)
        tau = rng.integers(0, 4, horizon).astype(float)
    else:
        alpha = rng.exponential(0.5, horizon)
        tau = rng.exponential(1.5, horizon)

    path = simulate_ggm(GGmSpec(servers=servers), alpha, tau, horizon)

    for k in range(1, horizon + 1):
        assert path.node_departures(1)[k - 1] == departure_bruteforce(path.completions, servers, k)


def test_departures_are_sorted_completions(rng):
    """Every customer leaves exactly once, so D is the sorted multiset of C."""
    alpha = rng.exponential(1.0, 300)
    tau = rng.exponential(2.5, 300)

    path = simulate_ggm(GGmSpec(servers=3), alpha, tau, 300)

    assert np.array_equal(path.node_departures(1), np.sort(path.completions))
    assert np.all(path.completions - path.node_arrivals(1) >= tau - 1e-12)


def test_bruteforce_guard():
    completions = list(range(1, 30))
    with pytest.raises(EnumerationGuardError) as excinfo:
        departure_bruteforce(completions, servers=10, k=12, guard=100)
    assert excinfo.value.details["guard"] == 100


def test_bruteforce_hand_values():
    assert departure_bruteforce([3.0, 1.0], servers=2, k=1) == 1.0
    assert departure_bruteforce([3.0, 1.0, 2.0], servers=2, k=2) == 2.0
