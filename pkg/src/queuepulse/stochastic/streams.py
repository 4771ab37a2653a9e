"""
Reproducible random streams.

A stream is a numpy ``Philox`` counter-based generator keyed by
``SeedSequence(seed, spawn_key=(stream_id,))``. Distinct stream ids give
independent key material, and the position counts raw 64-bit outputs, so
``RandomStream(seed, stream_id, position)`` always reproduces the same next
variates regardless of which process evaluates it.
"""
import numpy as np

from queuepulse.types import DomainError

# Role slots reserved per replication in the stream id space
ROLE_STRIDE = 4096
# Raw 64-bit outputs per Philox counter increment
PHILOX_BLOCK = 4


def substream_id(replication: int, role_index: int) -> int:
    """Stream id of duration role ``role_index`` within replication ``replication``."""
    if not 0 <= role_index < ROLE_STRIDE:
        raise DomainError(f"Role index {role_index} outside 0..{ROLE_STRIDE - 1}")
    if replication < 0:
        raise DomainError(f"Replication index must be nonnegative, got {replication}")
    return replication * ROLE_STRIDE + role_index


class RandomStream:
    def __init__(self, seed: int, stream_id: int = 0, position: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._bits = np.random.Philox(np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,)))
        self.position = 0
        self.skip(position)

    def skip(self, count: int) -> None:
        """Advance the stream by ``count`` raw outputs without generating the skipped blocks."""
        if count < 0:
            raise DomainError("Streams only move forward")
        # drain the current block so the counter sits on a block boundary
        buffered = min(count, PHILOX_BLOCK - int(self._bits.state["buffer_pos"]))
        if buffered:
            self._bits.random_raw(buffered)
        blocks, rest = divmod(count - buffered, PHILOX_BLOCK)
        if blocks:
            self._bits.advance(blocks)
        if rest:
            self._bits.random_raw(rest)
        self.position += count

    def uniforms(self, count: int) -> np.ndarray:
        """``count`` uniforms on the open interval (0, 1), one raw output each."""
        raw = self._bits.random_raw(count)
        self.position += count
        return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53

    def generator(self) -> np.random.Generator:
        """
        A Generator over this stream for non-inversion samplers.

        Draws made through it advance the underlying counter but not
        ``position``.
        """
        return np.random.Generator(self._bits)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id}, position={self.position})"
