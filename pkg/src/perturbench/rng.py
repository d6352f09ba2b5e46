"""Deterministic pseudo-randomness.

Every stochastic component in this package draws from a counter-based Philox
generator seeded explicitly; there is no global random state. Identical seeds
produce identical streams on every platform, which makes full experiment runs
byte-reproducible. Independent substreams (e.g. one per image in a parallel
grid) are derived from (seed, stream) key pairs, so parallel and serial
execution order cannot change any result.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(*parts: int) -> int:
    """Stable 64-bit seed from a tuple of integers (SHA-256 based).

    Used to give each (master_seed, image_index) pair its own attack seed.
    """
    h = hashlib.sha256()
    for p in parts:
        h.update(int(p).to_bytes(16, "little", signed=True))
    return int.from_bytes(h.digest()[:8], "little")


class Rng:
    """Seeded counter-based generator (NumPy Philox under the hood).

    `stream` selects an independent substream of the same seed; clones for
    parallel work should each get a distinct stream id.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def spawn(self, stream: int) -> "Rng":
        """Independent generator with the same seed and a distinct stream id."""
        return Rng(self.seed, stream)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def random(self, size=None):
        return self._gen.random(size)

    def choice(self, a, size=None, replace=True):
        return self._gen.choice(a, size=size, replace=replace)

    def permutation(self, n):
        return self._gen.permutation(n)

    def sign(self, size=None):
        """Random entries drawn uniformly from {-1.0, +1.0}."""
        return np.where(self._gen.random(size) < 0.5, -1.0, 1.0)
