"""Deterministic random numbers.

xoshiro256** seeded through splitmix64, with Box-Muller normals. The stream
depends only on the 64-bit seed and the sequence of calls, so every seeded
artifact in the package is reproducible across platforms and across the
compiled/pure-Python kernel backends.
"""

from __future__ import annotations

import numpy as np

from . import kernels

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> tuple[int, int]:
    """One splitmix64 step; returns ``(new_state, output)``."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return x, z ^ (z >> 31)


class Rng:
    """Seeded xoshiro256** generator.

    Normals are produced in Box-Muller pairs; an odd-length request discards
    the unused sine half, so the stream position after a call depends only on
    the requested length.
    """

    def __init__(self, seed: int):
        seed = int(seed) & _MASK
        self.seed = seed
        words = []
        x = seed
        for _ in range(4):
            x, out = splitmix64(x)
            words.append(out)
        self.state = np.array(words, dtype=np.uint64)

    def spawn(self, label: int) -> "Rng":
        """Independent child stream derived from this generator's seed."""
        _, out = splitmix64(self.seed ^ ((label * 0xD1B54A32D192ED03) & _MASK))
        return Rng(out)

    def next_u64(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.uint64)
        kernels.xoshiro_u64(self.state, out)
        return out

    def uniform(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        out = np.empty(n, dtype=np.float64)
        kernels.xoshiro_uniform(self.state, out)
        if low != 0.0 or high != 1.0:
            out = low + (high - low) * out
        return out

    def normal(self, n: int, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        out = np.empty(n, dtype=np.float64)
        kernels.xoshiro_normal(self.state, out)
        if mean != 0.0 or std != 1.0:
            out = mean + std * out
        return out

    def integers(self, n: int, high: int) -> np.ndarray:
        """Uniform integers in ``[0, high)`` via floor(u * high)."""
        u = self.uniform(n)
        return np.minimum((u * high).astype(np.int64), high - 1)

    def permutation(self, n: int) -> np.ndarray:
        # Fisher-Yates driven by one block of uniforms
        u = self.uniform(n)
        perm = np.arange(n)
        for k in range(n - 1, 0, -1):
            j = min(int(u[k] * (k + 1)), k)
            perm[k], perm[j] = perm[j], perm[k]
        return perm

    def truncated_normal(self, n: int, std: float, bound: float = 2.0) -> np.ndarray:
        """Normal(0, std) resampled until every value lies within ``bound`` std."""
        out = self.normal(n)
        bad = np.abs(out) > bound
        while bad.any():
            out[bad] = self.normal(int(bad.sum()))
            bad = np.abs(out) > bound
        return out * std
