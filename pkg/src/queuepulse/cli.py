import sys
from pathlib import Path

import click
from loguru import logger

from queuepulse import config
from queuepulse.infra.log import setup_logging
from queuepulse.processing import ExperimentProcessor, load_config
from queuepulse.types import ConfigError, QueuePulseError

MODES = ["path", "estimate", "steady", "antithetic", "crn", "ipa", "fd", "sweep", "validate"]


def _exit_code(error: QueuePulseError) -> int:
    return 1 if isinstance(error, ConfigError) else 2


def _validate_corpus(directory: Path, out: str, workers) -> int:
    files = sorted(directory.glob("*.yaml"))
    if not files:
        click.echo(f"No experiment files in {directory}", err=True)
        return 1
    processor = ExperimentProcessor(workers=workers)
    failures = 0
    for path in files:
        try:
            experiment = load_config(str(path), {"mode": "validate"})
            report = processor.process(experiment, out_dir=str(Path(out) / path.stem))
            click.echo(f"ok    {path.name}  max difference {report.summary[0]['mean']:.3g}")
        except QueuePulseError as e:
            failures += 1
            logger.error(f"{path.name}: {e}")
            click.echo(f"FAIL  {path.name}  {e}")
    click.echo(f"{len(files) - failures}/{len(files)} experiments agree with the oracle")
    return 0 if failures == 0 else 2


@click.group()
@click.option("--quiet", is_flag=True, default=False, help="Only log warnings and errors.")
def cli(quiet):
    """QueuePulse Queueing Simulation CLI"""
    setup_logging("WARNING" if quiet else None)


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Experiment file (YAML or manifest JSON).")
@click.option("--mode", type=click.Choice(MODES), help="Override the experiment mode.")
@click.option("--seed", type=int, help="Override the experiment seed.")
@click.option("--out", type=click.Path(file_okay=False), help="Report directory.")
@click.option("--validate", is_flag=True, default=False, help="Cross-check engine and oracle (the bundled corpus without --config).")
@click.option("--workers", type=int, help="Replication worker processes.")
@click.option("--quiet", is_flag=True, default=False, help="Only log warnings and errors.")
def run(config_path, mode, seed, out, validate, workers, quiet):
    """Run one experiment and write results.csv, summary.json and manifest.json"""
    if quiet:
        setup_logging("WARNING")
    if validate and not config_path:
        sys.exit(_validate_corpus(config.CORPUS_DIR, out or config.OUTPUT_DIR, workers))
    if not config_path:
        raise click.UsageError("--config is required unless --validate is given")
    try:
        experiment = load_config(config_path, {"mode": "validate" if validate else mode, "seed": seed, "out": out})
        report = ExperimentProcessor(workers=workers).process(experiment)
    except QueuePulseError as e:
        logger.error(str(e))
        click.echo(f"Error: {e}", err=True)
        sys.exit(_exit_code(e))
    for path in report.files:
        click.echo(str(path))


@cli.command("validate-corpus")
@click.option("--dir", "directory", type=click.Path(file_okay=False, exists=True), help="Directory of experiment files.")
@click.option("--out", type=click.Path(file_okay=False), help="Report directory.")
@click.option("--workers", type=int, help="Replication worker processes.")
def validate_corpus(directory, out, workers):
    """Validate every experiment of a corpus against the event-scheduling oracle"""
    sys.exit(_validate_corpus(Path(directory) if directory else config.CORPUS_DIR, out or config.OUTPUT_DIR, workers))


if __name__ == "__main__":
    cli()
