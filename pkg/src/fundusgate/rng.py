"""SplitMix64, vectorized.

The stream is fully defined by its recurrence, so generated corpora do not
depend on numpy's generator internals::

    state_{k+1} = state_k + 0x9E3779B97F4A7C15            (mod 2**64)
    z = state_{k+1}
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9              (mod 2**64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB              (mod 2**64)
    out_k = z ^ (z >> 31)

Uniform doubles are ``(out >> 11) * 2**-53``; normals use Box-Muller on two
consecutive uniforms ``u1, u2``: ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self, n: int) -> np.ndarray:
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(GOLDEN)
            out = _mix(z)
        self.state = (self.state + n * GOLDEN) & MASK64
        return out

    def next_int(self) -> int:
        return int(self.next_u64(1)[0])

    def uniform(self, n: int | tuple[int, ...] = 1, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        shape = (n,) if isinstance(n, int) else tuple(n)
        count = int(np.prod(shape))
        u = (self.next_u64(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return (low + (high - low) * u).reshape(shape)

    def scalar(self, low: float = 0.0, high: float = 1.0) -> float:
        return float(self.uniform(1, low, high)[0])

    def integer(self, low: int, high: int) -> int:
        """Integer in [low, high)."""
        return low + min(int(self.scalar() * (high - low)), high - low - 1)

    def normal(self, n: int | tuple[int, ...] = 1) -> np.ndarray:
        shape = (n,) if isinstance(n, int) else tuple(n)
        count = int(np.prod(shape))
        u = self.uniform(2 * count).reshape(count, 2)
        z = np.sqrt(-2.0 * np.log1p(-u[:, 0])) * np.cos(2.0 * np.pi * u[:, 1])
        return z.reshape(shape)
