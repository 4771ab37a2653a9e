from typing import Any, Mapping, Sequence

from queuepulse.engines.base import BaseEngine
from queuepulse.engines.registry import registry
from queuepulse.types import SamplePath

# Importing the engine modules registers them
from queuepulse.engines import multiserver, network, single_server  # noqa: F401,E402


def get_engine(kind: str) -> BaseEngine:
    return registry.create(kind)


def simulate(model: Any, durations: Mapping[str, Sequence[float]], horizon: Any) -> SamplePath:
    """Run the recursion engine for ``model.kind`` on role-keyed duration sequences."""
    return get_engine(model.kind).run(model, durations, horizon)
