import sys

import pytest
import yaml
from loguru import logger


@pytest.fixture(autouse=True)
def restore_log_sink():
    """The CLI re-targets loguru at the runner's captured stderr; point it back afterwards."""
    yield
    logger.remove()
    logger.add(sys.stderr, level="WARNING")


@pytest.fixture
def write_config(tmp_path):
    def _write(data: dict, name: str = "experiment.yaml"):
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data), encoding="utf-8")
        return path
    return _write
