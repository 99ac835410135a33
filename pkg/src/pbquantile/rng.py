"""Seedable, splittable uniform streams.

Every random draw in the package goes through a :class:`RandomSource`. A
source is identified by ``(seed, stream_id)``; the same pair always replays
the same stream, and child streams are derived by hashing so that parallel
work can be split statically without coordination.
"""

from __future__ import annotations

import hashlib

import numpy as np

_U64 = (1 << 64) - 1


def _check_u64(name: str, value: int) -> int:
    value = int(value)
    if not 0 <= value <= _U64:
        raise ValueError(f"{name} must be a 64-bit unsigned integer, got {value}")
    return value


def derive_stream_id(stream_id: int, child: int) -> int:
    """Map a parent stream id and a child index onto a new 64-bit stream id."""
    digest = hashlib.sha256(f"{stream_id}:{child}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big", signed=False)


class RandomSource:
    """A replayable stream of uniform variates backed by PCG64.

    The numpy generator is created lazily and is owned by this object, so a
    source must not be shared between concurrent tasks. Use :meth:`child`
    to hand each task its own stream.
    """

    __slots__ = ("seed", "stream_id", "_gen")

    def __init__(self, seed: int, stream_id: int = 0) -> None:
        self.seed = _check_u64("seed", seed)
        self.stream_id = _check_u64("stream_id", stream_id)
        self._gen: np.random.Generator | None = None

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, stream_id={self.stream_id})"

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def child(self, index: int) -> "RandomSource":
        """Independent sub-stream number ``index`` of this stream."""
        return RandomSource(self.seed, derive_stream_id(self.stream_id, index))

    def fresh(self) -> "RandomSource":
        """Same (seed, stream_id), rewound to the start of the stream."""
        return RandomSource(self.seed, self.stream_id)

    def uniform(self) -> float:
        """One variate from [0, 1)."""
        return float(self.generator.random())

    def uniforms(self, size) -> np.ndarray:
        return self.generator.random(size)
