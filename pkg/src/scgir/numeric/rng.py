"""Deterministic counter-based random number generator.

Every stochastic choice in the package (augmentation draws, channel noise,
parameter init, shuffling) flows through :class:`Rng`, so a single integer
seed pins down an entire experiment. The core stream is SplitMix64: the
i-th raw draw is ``mix64(key + i * GAMMA)``, pure 64-bit integer
arithmetic, so identical seeds give identical streams on every platform.
Conversion to uniform doubles multiplies by an exact power of two and is
likewise exact; the scalar (Python int) and vectorized (numpy uint64)
paths produce bit-identical values.
"""

from __future__ import annotations

import math

import numpy as np

_M64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV53 = 2.0 ** -53


class Rng:
    """Seeded SplitMix64 stream with uniform/normal/integer draws."""

    __slots__ = ("_key", "_count")

    def __init__(self, seed: int):
        self._key = seed & _M64
        self._count = 0

    # -- raw stream ---------------------------------------------------------

    def _raw1(self) -> int:
        self._count += 1
        z = (self._key + self._count * _GAMMA) & _M64
        z = ((z ^ (z >> 30)) * _MIX1) & _M64
        z = ((z ^ (z >> 27)) * _MIX2) & _M64
        return z ^ (z >> 31)

    def _rawn(self, n: int) -> np.ndarray:
        idx = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        z = np.uint64(self._key) + idx * np.uint64(_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    def raw_u64(self, size: int | None = None):
        """Next raw 64-bit draw(s): an int, or a uint64 array of `size`."""
        if size is None:
            return self._raw1()
        return self._rawn(size)

    # -- distributions ------------------------------------------------------

    def uniform(self, low: float = 0.0, high: float = 1.0, size: int | None = None):
        """Uniform draw(s) in [low, high)."""
        if size is None:
            u = (self._raw1() >> 11) * _INV53
            return low + (high - low) * u
        u = (self._rawn(size) >> np.uint64(11)).astype(np.float64) * _INV53
        return low + (high - low) * u

    def normal(self, size: int | None = None) -> np.ndarray | float:
        """Standard normal draw(s) via Box-Muller (cosine branch only).

        Consumes exactly 2 raw draws per variate so that the scalar and
        vectorized paths share one stream accounting.
        """
        n = 1 if size is None else size
        raw = self._rawn(2 * n)
        u1 = ((raw[:n] >> np.uint64(11)).astype(np.float64) + 1.0) * _INV53  # (0, 1]
        u2 = (raw[n:] >> np.uint64(11)).astype(np.float64) * _INV53  # [0, 1)
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)
        if size is None:
            return float(z[0])
        return z

    def randint(self, n: int, size: int | None = None):
        """Uniform integer(s) in [0, n), bias-free via rejection."""
        if n <= 0:
            raise ValueError(f"randint bound must be positive, got {n}")
        if n == 1:
            return 0 if size is None else np.zeros(size, dtype=np.int64)
        limit = (2 ** 64 // n) * n
        if size is None:
            while True:
                u = self._raw1()
                if u < limit:
                    return u % n
        out = np.empty(size, dtype=np.int64)
        pending = np.arange(size)
        while pending.size:
            u = self._rawn(pending.size)
            ok = u < np.uint64(limit)
            out[pending[ok]] = (u[ok] % np.uint64(n)).astype(np.int64)
            pending = pending[~ok]
        return out

    def coin(self, p: float) -> bool:
        """True with probability p."""
        return self.uniform() < p

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        perm = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.randint(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def split(self) -> "Rng":
        """Child generator seeded from this stream; streams are disjoint
        with overwhelming probability and fully reproducible."""
        return Rng(self._raw1())
