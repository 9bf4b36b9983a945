"""Deterministic random streams and stable seed derivation.

Gaussian draws come from numpy's PCG64 generator (ziggurat normal sampling),
so a fixed (seed, stream_id) pair reproduces the same sequence bit-exactly on
any platform running the same numpy build.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

_MASK64 = (1 << 64) - 1


def hash64(*parts) -> int:
    """Stable 64-bit hash of the given parts.

    Independent of process state (no reliance on Python's randomized hash),
    so derived seeds are reproducible across runs and machines.
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")


@dataclass
class RngStream:
    """A seeded noise stream; identical (seed, stream_id) reproduce identical draws."""

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ss = np.random.SeedSequence(entropy=self.seed & _MASK64, spawn_key=(self.stream_id & _MASK64,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def standard_normal(self, shape):
        return self._gen.standard_normal(shape)

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        return float(self._gen.uniform(low, high))
