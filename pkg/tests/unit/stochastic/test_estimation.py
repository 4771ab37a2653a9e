import math

import pytest
import scipy.stats as stats

from queuepulse.schemas.experiment import StochasticModel
from queuepulse.stochastic.estimation import (
    antithetic_estimate,
    crn_difference,
    estimate_finite_horizon,
    estimate_steady_state,
    run_replications,
    summarize,
    sweep,
)
from queuepulse.types import DomainError, ReplicationError, UnsupportedError


def _constant_gg1(gap: float, service: float) -> StochasticModel:
    return StochasticModel.model_validate({
        "model": {"kind": "gg1"},
        "distributions": {
            "interarrival": {"family": "constant", "value": gap},
            "service": {"family": "constant", "value": service},
        },
    })


def test_constant_samples_collapse():
    estimate = summarize("S@1", [2.5] * 10)

    assert estimate.mean == 2.5
    assert estimate.variance == 0.0
    assert estimate.half_width_95 == 0.0
    assert estimate.ci95 == [2.5, 2.5]


def test_small_samples_use_student_t():
    estimate = summarize("S@1", [1.0, 2.0, 3.0], seed=4, theta=[1.0])

    assert estimate.mean == pytest.approx(2.0)
    assert estimate.variance == pytest.approx(1.0)
    assert estimate.half_width_95 == pytest.approx(stats.t.ppf(0.975, 2) * math.sqrt(1 / 3))
    assert estimate.seed == 4
    assert estimate.theta == [1.0]


def test_large_samples_use_the_normal_quantile():
    samples = [float(i % 2) for i in range(40)]
    estimate = summarize("x", samples)

    assert estimate.half_width_95 == pytest.approx(stats.norm.ppf(0.975) * estimate.std_error)


def test_one_sample_is_not_an_estimate():
    with pytest.raises(DomainError):
        summarize("x", [1.0])


def test_deterministic_model_has_zero_variance():
    estimate = estimate_finite_horizon(_constant_gg1(1.0, 2.0), "S", [1.0], 3, replications=5)

    assert estimate.measure == "S@1"
    assert estimate.mean == 3.0
    assert estimate.variance == 0.0


def test_several_measures_come_back_in_order():
    estimates = estimate_finite_horizon(_constant_gg1(1.0, 2.0), ["S", "W", "T"], [1.0], 3, replications=3)

    assert [e.measure for e in estimates] == ["S@1", "W@1", "T@1"]
    assert estimates[2].mean == pytest.approx(3 / 7)


def test_estimates_are_reproducible(mm1):
    first = estimate_finite_horizon(mm1, "W", [1.0], 100, replications=8, seed=3)
    second = estimate_finite_horizon(mm1, "W", [1.0], 100, replications=8, seed=3)
    other = estimate_finite_horizon(mm1, "W", [1.0], 100, replications=8, seed=4)

    assert first == second
    assert first.mean != other.mean


def test_worker_count_does_not_change_results(mm1):
    serial = estimate_finite_horizon(mm1, ["S", "U"], [1.0], 60, replications=6, seed=1, workers=1)
    parallel = estimate_finite_horizon(mm1, ["S", "U"], [1.0], 60, replications=6, seed=1, workers=2)

    assert serial == parallel


def test_replication_failure_names_the_replication():
    def task(r):
        if r == 2:
            raise DomainError("bad theta")
        return r

    with pytest.raises(ReplicationError) as excinfo:
        run_replications(task, 4, workers=1)
    assert excinfo.value.replication == 2
    assert "DomainError" in str(excinfo.value)


def test_deadlocked_model_fails_in_first_replication():
    starved = StochasticModel.model_validate({
        "model": {
            "kind": "network",
            "node_count": 2,
            "populations": [0, 1],
            "routing": {"node_count": 2, "routes": [{"sequence": [1]}, {"sequence": [2]}]},
        },
        "distributions": {"service": {"family": "constant", "value": 1.0}},
    })

    with pytest.raises(ReplicationError) as excinfo:
        estimate_finite_horizon(starved, "S", [1.0], 2, replications=2)
    assert excinfo.value.replication == 0


def test_too_few_replications():
    with pytest.raises(DomainError):
        estimate_finite_horizon(_constant_gg1(1.0, 2.0), "S", [1.0], 3, replications=1)


def test_crn_with_equal_thetas_is_exactly_zero(mm1):
    estimate = crn_difference(mm1, "S", [1.0], [1.0], 80, replications=5, seed=2)

    assert estimate.measure == "dS@1"
    assert estimate.mean == 0.0
    assert estimate.variance == 0.0


def test_independent_streams_do_not_cancel(mm1):
    estimate = crn_difference(mm1, "S", [1.0], [1.0], 80, replications=5, seed=2, common=False)
    assert estimate.variance > 0.0


def test_antithetic_needs_inversion_sampling():
    model = StochasticModel.model_validate({
        "model": {"kind": "gg1"},
        "distributions": {
            "interarrival": {"family": "exponential", "rate": 1.0},
            "service": {"family": "gamma", "rate": 2.0, "shape": 1.5},
        },
    })
    with pytest.raises(UnsupportedError):
        antithetic_estimate(model, "S", [1.0], 20, pairs=4)


def test_antithetic_estimate_runs(mm1):
    estimate = antithetic_estimate(mm1, "S", [0.5], 50, pairs=4, seed=1)
    assert estimate.replications == 4
    assert estimate.mean > 0.0


def test_sweep_walks_the_grid(mm1):
    grid = sweep(mm1, "U", [0.5, 1.0], 50, replications=3, seed=1)

    assert [point.theta for point in grid] == [[0.5], [1.0]]
    assert grid[0].mean < grid[1].mean


def test_steady_state_constant_model_never_waits():
    """Gaps 2, services 1: D_k = 2k + 1, so every post-warmup batch has W = 0, S = 1 and T = 1/2."""
    waiting, system, throughput = estimate_steady_state(
        _constant_gg1(2.0, 1.0), ["W", "S", "T"], [1.0], 200, warmup=8, batches=4
    )

    assert waiting.mean == 0.0
    assert waiting.variance == 0.0
    assert system.mean == 1.0
    assert throughput.mean == 0.5
    assert not any(e.unstable for e in (waiting, system, throughput))


def test_steady_state_first_batch_starts_at_time_zero():
    """Without warmup the first batch spans 0..D_50 = 101, the others D_{k-1}..D_{k+49} = 100."""
    throughput = estimate_steady_state(_constant_gg1(2.0, 1.0), "T", [1.0], 200, warmup=0, batches=4)

    assert throughput.mean == pytest.approx((50 / 101 + 3 * 0.5) / 4, rel=1e-12)
    assert not throughput.unstable


def test_steady_state_flags_a_growing_queue():
    """Services longer than the gaps make every batch mean larger than the last."""
    estimate = estimate_steady_state(_constant_gg1(1.0, 2.0), "S", [1.0], 200, warmup=10, batches=5)
    assert estimate.unstable


def test_steady_state_argument_checks():
    model = _constant_gg1(2.0, 1.0)
    with pytest.raises(DomainError):
        estimate_steady_state(model, "S", [1.0], 100, warmup=100)
    with pytest.raises(DomainError):
        estimate_steady_state(model, "S", [1.0], 100, warmup=0, batches=1)
    with pytest.raises(DomainError):
        estimate_steady_state(model, "S", [1.0], 10, warmup=5, batches=8)
