from dataclasses import dataclass
from typing import Any, Dict, Literal, Optional, Sequence, Tuple
from enum import Enum

import numpy as np

UNBOUNDED = "unbounded"
Capacity = int | Literal["unbounded"]


class Blocking(str, Enum):
    MANUFACTURING = "manufacturing"
    COMMUNICATION = "communication"


@dataclass(frozen=True)
class SamplePath:
    """
    One realization of a queueing model.

    Node sequences are stored 0-based in tuples, one float array per node; the
    public API addresses nodes 1-based (``path.node_departures(1)``).
    For G/G/m models ``completions`` holds C_k in arrival order and
    ``departures[0]`` the sorted departure epochs.
    """
    arrivals: Tuple[np.ndarray, ...]
    departures: Tuple[np.ndarray, ...]
    horizon: int
    completions: Optional[np.ndarray] = None
    horizons: Optional[Tuple[int, ...]] = None

    @property
    def node_count(self) -> int:
        return len(self.departures)

    def node_arrivals(self, node: int) -> np.ndarray:
        return self.arrivals[self._index(node)]

    def node_departures(self, node: int) -> np.ndarray:
        return self.departures[self._index(node)]

    def _index(self, node: int) -> int:
        if not 1 <= node <= self.node_count:
            raise DomainError(f"Node {node} out of range 1..{self.node_count}")
        return node - 1

    @classmethod
    def from_lists(
        cls,
        arrivals: Sequence[Sequence[float]],
        departures: Sequence[Sequence[float]],
        horizon: int,
        completions: Optional[Sequence[float]] = None,
        horizons: Optional[Sequence[int]] = None,
    ) -> "SamplePath":
        return cls(
            arrivals=tuple(np.asarray(a, dtype=float) for a in arrivals),
            departures=tuple(np.asarray(d, dtype=float) for d in departures),
            horizon=horizon,
            completions=None if completions is None else np.asarray(completions, dtype=float),
            horizons=None if horizons is None else tuple(horizons),
        )


class QueuePulseError(Exception):
    """Base error for QueuePulse"""
    pass


class ConfigError(QueuePulseError):
    """Experiment description unreadable or invalid"""
    pass


class ValidationError(QueuePulseError):
    """Errors during input validation"""
    pass


class InputLengthError(ValidationError):
    """A duration sequence is shorter than the requested horizon, or missing"""
    pass


class DomainError(ValidationError):
    """A value lies outside its admissible domain (negative duration, m < 1, theta outside Theta)"""
    pass


class SimulationError(QueuePulseError):
    """Errors occurring while a sample path is evaluated"""
    def __init__(self, message: str, details: Dict[str, Any] = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)


class DeadlockError(SimulationError):
    """No node can produce its next departure while targets remain unmet"""
    def __init__(self, message: str, nodes: Sequence[int] = ()):
        self.nodes = tuple(nodes)
        super().__init__(message, details={"nodes": list(self.nodes)})


class HorizonError(SimulationError):
    """A departure beyond a node's supplied service times is needed elsewhere"""
    pass


class EnumerationGuardError(SimulationError):
    """Brute-force subset enumeration would exceed the configured guard"""
    pass


class UnsupportedError(SimulationError):
    """The requested mapping or pairing is not defined for this input"""
    pass


class ReplicationError(SimulationError):
    """A model simulation error raised inside replication ``replication``"""
    def __init__(self, message: str, replication: int, cause: Optional[BaseException] = None):
        self.replication = replication
        self.cause = cause
        super().__init__(f"Replication {replication}: {message}", details={"replication": replication})


class OracleMismatchError(SimulationError):
    """Recursion engine and event-scheduling oracle disagree beyond tolerance"""
    pass
