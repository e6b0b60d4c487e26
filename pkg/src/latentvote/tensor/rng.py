"""Counter-based splittable random number generation.

Built on numpy's Philox generator keyed by a SeedSequence spawn path, so any
substream is a pure function of (seed, path). Candidate k of instance i can
always be regenerated from ``Rng(seed).split(i, k)`` without replaying any
other draw, which is what makes voting runs reproducible.
"""

from __future__ import annotations

import copy
import zlib

import numpy as np


def _path_element(value) -> int:
    if isinstance(value, str):
        return zlib.crc32(value.encode("utf-8"))
    iv = int(value)
    if iv < 0:
        raise ValueError(f"rng path elements must be non-negative, got {value!r}")
    return iv


class Rng:
    """Deterministic, splittable RNG stream.

    Identical (seed, path) always yields bit-identical draw sequences,
    independent of platform and of any other stream.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(_path_element(p) for p in path)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.Philox(seq))

    def split(self, *path) -> "Rng":
        """Derive an independent child stream; tags may be ints or names."""
        return Rng(self.seed, self.path + tuple(path))

    def clone(self) -> "Rng":
        """Copy of this stream at its current position."""
        out = Rng.__new__(Rng)
        out.seed = self.seed
        out.path = self.path
        out._gen = copy.deepcopy(self._gen)
        return out

    def normal(self, shape=()) -> np.ndarray:
        """I.i.d. standard-normal float32 draws."""
        return self._gen.standard_normal(size=shape, dtype=np.float32)

    def integers(self, low, high=None, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size=size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size=size)

    def shuffle(self, seq) -> None:
        self._gen.shuffle(seq)

    def permutation(self, n) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, seq, size=None, replace=True):
        return self._gen.choice(seq, size=size, replace=replace)

    def __repr__(self):
        return f"Rng(seed={self.seed}, path={self.path})"
