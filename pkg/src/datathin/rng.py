"""Seedable, splittable random streams.

A :class:`RngState` is a plain value ``(seed, stream)``.  Turning it into a
generator is deterministic, so the same value always replays the same draws.
Child streams are derived with :meth:`RngState.split`, which mixes the parent
stream id and the child index through ``numpy.random.SeedSequence`` spawn
keys; distinct keys give statistically independent PCG64 streams.
"""

from __future__ import annotations

from dataclasses import dataclass
import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngState:
    seed: int
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= value <= _MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value!r}")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.PCG64(seq))

    def split(self, index: int) -> "RngState":
        """Child stream number ``index`` of this stream."""
        # splitmix64 finaliser over (stream, index) keeps ids in 64 bits
        z = (int(self.stream) * 0x9E3779B97F4A7C15 + int(index) + 1) & _MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return RngState(self.seed, z ^ (z >> 31))

    def split_named(self, name: str) -> "RngState":
        return self.split(zlib.crc32(name.encode("utf-8")))


def as_generator(rng) -> np.random.Generator:
    """Accept an ``RngState``, a ``Generator`` or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngState):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngState(int(rng)).generator()
    raise TypeError(f"cannot build a random generator from {type(rng).__name__}")
