"""Reproducible random streams.

Sampling uses the counter-based Philox generator with a 128-bit key packing
(master seed, stream id). Episode i draws from stream i, so replications
are bit-reproducible regardless of scheduling or how many draws other
episodes consume. Reserved stream ids keep auxiliary draws (table
initialization, start states) out of the episode streams.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# reserved stream ids (top of the 64-bit stream space)
INIT_STREAM = MASK64
TRAIN_STREAM = MASK64 - 1


def stream_key(seed: int, stream: int) -> int:
    return ((seed & MASK64) << 64) | (stream & MASK64)


def stream_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Fresh generator for one (seed, stream) pair."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, stream)))


class PhiloxStreams:
    """Re-keyable generator: ``generator(stream)`` yields the same values as
    ``stream_generator(seed, stream)`` but without per-stream construction
    cost. Not thread-safe; each worker should own its instance."""

    def __init__(self, seed: int):
        self._seed = seed & MASK64
        self._bg = np.random.Philox(key=stream_key(seed, 0))
        self._gen = np.random.Generator(self._bg)

    def generator(self, stream: int) -> np.random.Generator:
        st = self._bg.state
        st["state"]["key"] = np.array(
            [stream & MASK64, self._seed], dtype=np.uint64
        )
        st["state"]["counter"] = np.zeros(4, dtype=np.uint64)
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._bg.state = st
        return self._gen


def replication_seed(master_seed: int, replication: int) -> int:
    """Well-separated per-replication seed derived from a master seed."""
    ss = np.random.SeedSequence(entropy=master_seed & MASK64, spawn_key=(replication,))
    return int(ss.generate_state(1, np.uint64)[0])
