"""
Monte Carlo estimation over independent replications.

Replication ``r`` reads substreams ``substream_id(r, role)``, so its inputs are
fixed by (seed, r) alone and results do not depend on how replications are
spread over worker processes. Reductions run in replication order with
``math.fsum``.
"""
import math
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Any, Callable, List, Optional, Sequence, Union

import numpy as np
import scipy.stats as stats
from loguru import logger

from queuepulse import config
from queuepulse.engines import simulate
from queuepulse.metrics import evaluate_measure, window_measure
from queuepulse.schemas.experiment import Estimate, MeasureSelector, StochasticModel
from queuepulse.stochastic.distributions import sample_inputs
from queuepulse.types import DomainError, QueuePulseError, ReplicationError, UnsupportedError

Selectors = Union[str, MeasureSelector, Sequence[Union[str, MeasureSelector]]]


def as_selectors(selectors: Selectors) -> List[MeasureSelector]:
    if isinstance(selectors, (str, MeasureSelector)):
        selectors = [selectors]
    return [MeasureSelector.parse(s) if isinstance(s, str) else s for s in selectors]


def _unwrap(selectors: Selectors, estimates: List[Estimate]):
    return estimates[0] if isinstance(selectors, (str, MeasureSelector)) else estimates


def summarize(
    measure: str,
    samples: Sequence[float],
    seed: Optional[int] = None,
    theta: Optional[Sequence[float]] = None,
    ties: int = 0,
    unstable: bool = False,
) -> Estimate:
    """Sample mean, variance and 95% half-width (Student-t below the normal threshold)."""
    x = np.asarray(samples, dtype=float)
    count = x.size
    if count < 2:
        raise DomainError(f"An estimate needs at least 2 samples, got {count}")
    if np.all(x == x[0]):
        mean, variance = float(x[0]), 0.0
    else:
        mean = math.fsum(x) / count
        variance = math.fsum((x - mean) ** 2) / (count - 1)
    std_error = math.sqrt(variance / count)
    if count >= config.NORMAL_THRESHOLD:
        quantile = stats.norm.ppf(0.975)
    else:
        quantile = stats.t.ppf(0.975, count - 1)
    return Estimate(
        measure=measure,
        mean=mean,
        variance=variance,
        half_width_95=float(quantile * std_error),
        replications=count,
        std_error=std_error,
        ties=ties,
        unstable=unstable,
        seed=seed,
        theta=None if theta is None else [float(t) for t in theta],
    )


# --- Replication runner ---

def _guarded(task: Callable[[int], Any], replication: int):
    try:
        return True, task(replication)
    except QueuePulseError as e:
        return False, (type(e).__name__, str(e))


def run_replications(task: Callable[[int], Any], replications: int, workers: Optional[int] = None) -> List[Any]:
    """
    Evaluate ``task(r)`` for r = 0..R-1, in-process or on a process pool.
    ``task`` must be picklable when ``workers`` > 1.
    """
    workers = config.WORKERS if workers is None else workers
    if workers <= 1 or replications <= 1:
        outcomes = [_guarded(task, r) for r in range(replications)]
    else:
        logger.debug(f"Running {replications} replications on {workers} workers")
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(partial(_guarded, task), range(replications)))

    results = []
    for r, (ok, value) in enumerate(outcomes):
        if not ok:
            name, message = value
            logger.error(f"Replication {r} failed with {name}: {message}")
            raise ReplicationError(f"{name}: {message}", replication=r)
        results.append(value)
    return results


def replicate_measures(
    stochastic: StochasticModel,
    selectors: List[MeasureSelector],
    theta: Sequence[float],
    horizon,
    seed: int,
    replication: int,
    antithetic: bool = False,
) -> List[float]:
    """Every selected measure on the path of one replication."""
    durations, _ = sample_inputs(stochastic, theta, seed, replication, horizon, antithetic=antithetic)
    path = simulate(stochastic.model, durations, horizon)
    return [evaluate_measure(stochastic.model, path, durations, s) for s in selectors]


def _finite_task(stochastic, selectors, theta, horizon, seed, replication):
    return replicate_measures(stochastic, selectors, theta, horizon, seed, replication)


def _antithetic_task(stochastic, selectors, theta, horizon, seed, replication):
    plain = replicate_measures(stochastic, selectors, theta, horizon, seed, replication)
    mirrored = replicate_measures(stochastic, selectors, theta, horizon, seed, replication, antithetic=True)
    return [(a + b) / 2.0 for a, b in zip(plain, mirrored)]


def _difference_task(stochastic, selectors, theta_1, theta_2, horizon, seed, offset, replication):
    first = replicate_measures(stochastic, selectors, theta_1, horizon, seed, replication)
    second = replicate_measures(stochastic, selectors, theta_2, horizon, seed, replication + offset)
    return [a - b for a, b in zip(first, second)]


def _check_replications(replications: int) -> None:
    if replications < 2:
        raise DomainError(f"Need at least 2 replications, got {replications}")


# --- Estimators ---

def estimate_finite_horizon(
    stochastic: StochasticModel,
    selectors: Selectors,
    theta: Sequence[float],
    horizon,
    replications: int,
    seed: int = 0,
    workers: Optional[int] = None,
):
    """Crude Monte Carlo estimate of E[F_K(theta)] from R independent paths."""
    _check_replications(replications)
    chosen = as_selectors(selectors)
    task = partial(_finite_task, stochastic, chosen, list(theta), horizon, seed)
    rows = run_replications(task, replications, workers)
    estimates = [summarize(s.label, [row[i] for row in rows], seed=seed, theta=theta) for i, s in enumerate(chosen)]
    logger.info(f"Finite-horizon estimate over R={replications}: "
                + ", ".join(f"{e.measure}={e.mean:.6g}±{e.half_width_95:.3g}" for e in estimates))
    return _unwrap(selectors, estimates)


def antithetic_estimate(
    stochastic: StochasticModel,
    selectors: Selectors,
    theta: Sequence[float],
    horizon,
    pairs: int,
    seed: int = 0,
    workers: Optional[int] = None,
):
    """Averages (F(u) + F(1 - u)) / 2 over ``pairs`` antithetic pairs."""
    _check_replications(pairs)
    for role in stochastic.roles():
        spec = stochastic.distribution_for(role)
        if not spec.invertible:
            raise UnsupportedError(f"Role '{role}' uses family '{spec.family}', which is not inversion-sampled",
                                   details={"role": role, "family": spec.family})
    chosen = as_selectors(selectors)
    task = partial(_antithetic_task, stochastic, chosen, list(theta), horizon, seed)
    rows = run_replications(task, pairs, workers)
    estimates = [summarize(s.label, [row[i] for row in rows], seed=seed, theta=theta) for i, s in enumerate(chosen)]
    return _unwrap(selectors, estimates)


def crn_difference(
    stochastic: StochasticModel,
    selectors: Selectors,
    theta_1: Sequence[float],
    theta_2: Sequence[float],
    horizon,
    replications: int,
    seed: int = 0,
    common: bool = True,
    workers: Optional[int] = None,
):
    """
    Paired estimate of F(theta_1) - F(theta_2). With ``common`` both sides of
    pair r replay the streams of replication r; otherwise the second side uses
    the disjoint replications R..2R-1.
    """
    _check_replications(replications)
    chosen = as_selectors(selectors)
    offset = 0 if common else replications
    task = partial(_difference_task, stochastic, chosen, list(theta_1), list(theta_2), horizon, seed, offset)
    rows = run_replications(task, replications, workers)
    estimates = [summarize(f"d{s.label}", [row[i] for row in rows], seed=seed, theta=theta_1)
                 for i, s in enumerate(chosen)]
    return _unwrap(selectors, estimates)


def sweep(
    stochastic: StochasticModel,
    selectors: Selectors,
    thetas: Sequence[float],
    horizon,
    replications: int,
    coordinate: int = 0,
    base_theta: Optional[Sequence[float]] = None,
    seed: int = 0,
    workers: Optional[int] = None,
) -> List:
    """
    Finite-horizon estimates along one theta coordinate. Every grid point
    reuses the same streams, so differences between points carry common
    random numbers.
    """
    base = list(base_theta) if base_theta is not None else [1.0] * max(stochastic.theta_size, coordinate + 1)
    if coordinate >= len(base):
        raise DomainError(f"coordinate {coordinate} is outside theta of size {len(base)}")
    results = []
    for value in thetas:
        theta = list(base)
        theta[coordinate] = float(value)
        results.append(estimate_finite_horizon(stochastic, selectors, theta, horizon, replications, seed, workers))
    return results


def estimate_steady_state(
    stochastic: StochasticModel,
    selectors: Selectors,
    theta: Sequence[float],
    horizon: int,
    warmup: Optional[int] = None,
    batches: Optional[int] = None,
    seed: int = 0,
):
    """
    Batch means over customers K0+1..K of a single long path. Customers past
    the last full batch are dropped. A batch-mean sequence that is strictly
    monotone is flagged ``unstable``.
    """
    if isinstance(horizon, (list, tuple)):
        horizon = min(horizon)
    warmup = int(horizon * config.WARMUP_FRACTION) if warmup is None else int(warmup)
    batches = config.BATCHES if batches is None else int(batches)
    if not 0 <= warmup < horizon:
        raise DomainError(f"Warmup {warmup} must lie in 0..K-1 for K={horizon}")
    if batches < 2:
        raise DomainError(f"Need at least 2 batches, got {batches}")
    size = (horizon - warmup) // batches
    if size < 1:
        raise DomainError(f"{horizon - warmup} customers cannot fill {batches} batches")

    chosen = as_selectors(selectors)
    try:
        durations, _ = sample_inputs(stochastic, theta, seed, 0, horizon)
        path = simulate(stochastic.model, durations, horizon)
    except QueuePulseError as e:
        raise ReplicationError(str(e), replication=0, cause=e) from e

    estimates = []
    for selector in chosen:
        means = [
            window_measure(stochastic.model, path, durations, selector,
                           warmup + b * size + 1, warmup + (b + 1) * size)
            for b in range(batches)
        ]
        steps = np.diff(means)
        unstable = steps.size >= 2 and bool(np.all(steps > 0) or np.all(steps < 0))
        if unstable:
            logger.warning(f"Batch means of {selector.label} trend monotonically; the configuration may be unstable")
        estimates.append(summarize(selector.label, means, seed=seed, theta=theta, unstable=unstable))
    return _unwrap(selectors, estimates)
