"""
Experiment Processing Logic

Loads an experiment description, dispatches it to the estimator of its mode
and writes the report files. Used by the CLI; usable directly from Python.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import pydantic
import yaml
from loguru import logger

from queuepulse import config
from queuepulse.engines import simulate
from queuepulse.infra.storage import ReportWriter
from queuepulse.ipa import fd_gradient, ipa_gradient
from queuepulse.metrics import evaluate_measure
from queuepulse.oracle.des import validate_against_oracle
from queuepulse.schemas.experiment import Estimate, ExperimentConfig
from queuepulse.stochastic.distributions import sample_inputs
from queuepulse.stochastic.estimation import (
    antithetic_estimate,
    crn_difference,
    estimate_finite_horizon,
    estimate_steady_state,
    sweep,
)
from queuepulse.types import ConfigError

ESTIMATE_HEADER = ["measure", "theta", "mean", "variance", "ci95_low", "ci95_high", "R", "seed"]


@dataclass
class RunReport:
    header: List[str]
    rows: List[List[Any]]
    summary: List[Dict[str, Any]]
    manifest: Dict[str, Any]
    files: List[Path] = field(default_factory=list)


def load_config(path: str, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Parse a YAML (or JSON manifest) experiment file; ``overrides`` replace top-level keys."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"Cannot read experiment file {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Experiment file {path} must hold a mapping")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "out":
            data.setdefault("output", {})["dir"] = value
        else:
            data[key] = value
    try:
        return ExperimentConfig.model_validate(data)
    except pydantic.ValidationError as e:
        raise ConfigError(f"Invalid experiment file {path}:\n{e}") from e


def _summary_entry(estimate: Estimate, **extra) -> Dict[str, Any]:
    entry = {
        "measure": estimate.measure,
        "mean": estimate.mean,
        "variance": estimate.variance,
        "ci95": estimate.ci95,
        "half_width_95": estimate.half_width_95,
        "R": estimate.replications,
        "seed": estimate.seed,
        "theta": estimate.theta,
    }
    if estimate.ties:
        entry["ties"] = estimate.ties
    if estimate.unstable:
        entry["unstable"] = True
    entry.update(extra)
    return entry


def _estimate_row(estimate: Estimate, theta: Any) -> List[Any]:
    low, high = estimate.ci95
    return [estimate.measure, theta, estimate.mean, estimate.variance, low, high, estimate.replications, estimate.seed]


class ExperimentProcessor:
    """Runs one experiment configuration end to end."""

    def __init__(self, workers: Optional[int] = None):
        self.workers = workers
        self._handlers: Dict[str, Callable[[ExperimentConfig], RunReport]] = {
            "path": self._run_path,
            "estimate": self._run_estimates,
            "steady": self._run_estimates,
            "antithetic": self._run_estimates,
            "crn": self._run_estimates,
            "ipa": self._run_estimates,
            "fd": self._run_estimates,
            "sweep": self._run_sweep,
            "validate": self._run_validate,
        }

    def process(self, experiment: ExperimentConfig, out_dir: Optional[str] = None) -> RunReport:
        logger.info(f"Processing experiment '{experiment.name}' ({experiment.model.kind}, mode={experiment.mode})")
        report = self._handlers[experiment.mode](experiment)
        writer = ReportWriter(out_dir or experiment.output.dir or config.OUTPUT_DIR)
        report.files = [
            writer.write_rows(report.header, report.rows),
            writer.write_summary(report.summary),
            writer.write_manifest(report.manifest),
        ]
        logger.info(f"Experiment '{experiment.name}' completed")
        return report

    @staticmethod
    def _manifest(experiment: ExperimentConfig) -> Dict[str, Any]:
        return experiment.model_dump(mode="json", exclude_none=True)

    def _run_path(self, experiment: ExperimentConfig) -> RunReport:
        durations, _ = sample_inputs(experiment, experiment.theta, experiment.seed, 0, experiment.horizon)
        path = simulate(experiment.model, durations, experiment.horizon)
        with_completions = path.completions is not None
        header = ["node", "k", "arrival", "departure"] + (["completion"] if with_completions else [])
        rows = []
        for n in range(path.node_count):
            for k, (a, d) in enumerate(zip(path.arrivals[n], path.departures[n]), start=1):
                row = [n + 1, k, float(a), float(d)]
                if with_completions:
                    row.append(float(path.completions[k - 1]))
                rows.append(row)
        summary = []
        for selector in experiment.selectors():
            value = evaluate_measure(experiment.model, path, durations, selector)
            summary.append({"measure": selector.label, "mean": value, "variance": 0.0, "ci95": [value, value],
                            "R": 1, "seed": experiment.seed, "theta": experiment.theta})
        return RunReport(header, rows, summary, self._manifest(experiment))

    def _estimates(self, experiment: ExperimentConfig) -> List[Estimate]:
        common = dict(seed=experiment.seed, workers=self.workers)
        args = (experiment, experiment.measures, experiment.theta, experiment.horizon)
        mode = experiment.mode
        if mode == "estimate":
            return estimate_finite_horizon(*args, experiment.replications, **common)
        if mode == "steady":
            return estimate_steady_state(*args, warmup=experiment.warmup, batches=experiment.batches,
                                         seed=experiment.seed)
        if mode == "antithetic":
            return antithetic_estimate(*args, experiment.replications, **common)
        if mode == "crn":
            return crn_difference(experiment, experiment.measures, experiment.theta, experiment.theta_alt,
                                  experiment.horizon, experiment.replications, **common)
        if mode == "ipa":
            return ipa_gradient(*args, experiment.replications, coordinate=experiment.coordinate, **common)
        return fd_gradient(experiment, experiment.measures, experiment.theta, experiment.step, experiment.horizon,
                           experiment.replications, coordinate=experiment.coordinate, **common)

    def _run_estimates(self, experiment: ExperimentConfig) -> RunReport:
        estimates = self._estimates(experiment)
        rows = [_estimate_row(e, experiment.theta) for e in estimates]
        extra = {"mode": experiment.mode}
        if experiment.mode == "crn":
            extra["theta_alt"] = experiment.theta_alt
        summary = [_summary_entry(e, **extra) for e in estimates]
        return RunReport(ESTIMATE_HEADER, rows, summary, self._manifest(experiment))

    def _run_sweep(self, experiment: ExperimentConfig) -> RunReport:
        grid = sweep(experiment, experiment.measures, experiment.thetas, experiment.horizon, experiment.replications,
                     coordinate=experiment.coordinate, base_theta=experiment.theta,
                     seed=experiment.seed, workers=self.workers)
        rows, summary = [], []
        for point in grid:
            for estimate in point:
                rows.append(_estimate_row(estimate, estimate.theta))
                summary.append(_summary_entry(estimate, mode="sweep"))
        return RunReport(ESTIMATE_HEADER, rows, summary, self._manifest(experiment))

    def _run_validate(self, experiment: ExperimentConfig) -> RunReport:
        rows = []
        worst = 0.0
        for r in range(experiment.replications):
            durations, _ = sample_inputs(experiment, experiment.theta, experiment.seed, r, experiment.horizon)
            difference = validate_against_oracle(experiment.model, durations, experiment.horizon)
            worst = max(worst, difference)
            rows.append([r, difference])
        logger.info(f"'{experiment.name}': engine and oracle agree on {experiment.replications} replications "
                    f"(max difference {worst:.3g})")
        summary = [{"measure": "oracle_max_difference", "mean": worst, "R": experiment.replications,
                    "seed": experiment.seed, "tolerance": config.ORACLE_TOLERANCE, "kind": experiment.model.kind}]
        return RunReport(["replication", "max_difference"], rows, summary, self._manifest(experiment))
