from abc import ABC, abstractmethod
from typing import Any, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from queuepulse.types import DomainError, InputLengthError, SamplePath

# (arrivals per node, departures per node, completions or None)
Trace = Tuple[List[List[Any]], List[List[Any]], Optional[List[Any]]]


class BaseEngine(ABC):
    """
    Base class for all recursion engines.

    ``recurse`` evaluates the model equations on plain sequences using only
    ``+``, ``max`` and ``min``, so it accepts floats as well as
    tangent-carrying epochs. ``run`` validates float inputs, calls ``recurse``
    and packs the result into a SamplePath.
    """

    # Networks consume service times past their targets, so they keep the full sequences.
    truncate_inputs = True

    @abstractmethod
    def recurse(self, model: Any, durations: Mapping[str, Sequence[Any]], horizon: Any) -> Trace:
        """Evaluate the recursion for ``horizon`` customers."""
        pass

    def required_lengths(self, model: Any, horizon: Any) -> Mapping[str, int]:
        """Minimum length of every duration role."""
        return {role: int(horizon) for role in model.duration_roles()}

    def run(self, model: Any, durations: Mapping[str, Sequence[float]], horizon: Any) -> SamplePath:
        inputs = {
            role: check_durations(durations.get(role), length, role, truncate=self.truncate_inputs)
            for role, length in self.required_lengths(model, horizon).items()
        }
        arrivals, departures, completions = self.recurse(model, inputs, horizon)
        return SamplePath.from_lists(
            arrivals, departures, horizon=_scalar_horizon(horizon),
            completions=completions,
            horizons=None if np.isscalar(horizon) else tuple(horizon),
        )


def check_horizon(horizon: int) -> int:
    if int(horizon) < 1:
        raise DomainError(f"Horizon must be a positive integer, got {horizon}")
    return int(horizon)


def check_durations(seq: Optional[Sequence[float]], horizon: int, name: str, truncate: bool = True) -> List[float]:
    """Validate a duration sequence against horizon K; returns its first K items (or all of them) as floats."""
    if seq is None:
        raise InputLengthError(f"Missing duration sequence '{name}'")
    arr = np.asarray(seq, dtype=float)
    if arr.ndim != 1 or arr.size < horizon:
        raise InputLengthError(f"Sequence '{name}' has {arr.size} items, horizon needs {horizon}")
    if truncate:
        arr = arr[:horizon]
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"Sequence '{name}' contains non-finite durations")
    if np.any(arr < 0):
        raise DomainError(f"Sequence '{name}' contains negative durations")
    return arr.tolist()


def _scalar_horizon(horizon: Any) -> int:
    return int(horizon) if np.isscalar(horizon) else int(max(horizon))
