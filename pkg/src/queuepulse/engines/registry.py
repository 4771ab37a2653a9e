from typing import Dict, List, Type

from queuepulse.engines.base import BaseEngine
from queuepulse.types import UnsupportedError


class EngineRegistry:
    """Maps a model ``kind`` to the engine class that evaluates its recursion."""

    def __init__(self):
        self._engines: Dict[str, Type[BaseEngine]] = {}

    def register(self, kind: str):
        """Decorator binding an engine class to a model kind; one engine per kind."""
        def decorator(engine_cls: Type[BaseEngine]):
            existing = self._engines.get(kind)
            if existing is not None and existing is not engine_cls:
                raise ValueError(f"Kind '{kind}' already served by {existing.__name__}")
            self._engines[kind] = engine_cls
            return engine_cls
        return decorator

    def create(self, kind: str) -> BaseEngine:
        engine_cls = self._engines.get(kind)
        if engine_cls is None:
            raise UnsupportedError(f"No engine registered for model kind '{kind}'",
                                   details={"registered": self.kinds()})
        return engine_cls()

    def kinds(self) -> List[str]:
        return sorted(self._engines)


# Global registry instance
registry = EngineRegistry()
