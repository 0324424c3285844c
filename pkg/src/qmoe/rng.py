"""Deterministic counter-based random number generator.

The generator is fully specified here rather than delegated to the
platform's default RNG, so that identical seeds produce byte-identical
streams on every platform and numpy version. The core is the splitmix64
finalizer applied to ``seed + counter * GAMMA``: output ``i`` depends only
on ``(seed, i)``, which allows the array methods to produce the exact same
stream as repeated scalar calls while being computed with vectorized
uint64 arithmetic.

An ``Rng`` instance is single-owner: it carries a mutable counter and must
not be shared across concurrent tasks.
"""

from __future__ import annotations

import math

import numpy as np

_GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB
_MASK64 = (1 << 64) - 1

# 2**-53; a 53-bit mantissa fills a float64 uniformly
_INV53 = 1.0 / (1 << 53)


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MUL1) & _MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & _MASK64
    return z ^ (z >> 31)


class Rng:
    """Splitmix64 stream identified by (seed, counter)."""

    def __init__(self, seed: int):
        self._seed = seed & _MASK64
        self._counter = 0

    @property
    def seed(self) -> int:
        return self._seed

    def spawn(self, key: int) -> "Rng":
        """Independent child stream; deterministic in (seed, key).

        The child seed is the mix of the parent seed and key, so spawning
        does not advance or depend on the parent's counter.
        """
        return Rng(_mix((self._seed ^ _mix(key & _MASK64)) & _MASK64))

    def next_u64(self) -> int:
        self._counter += 1
        return _mix((self._seed + self._counter * _GAMMA) & _MASK64)

    def _next_block(self, n: int) -> np.ndarray:
        """n raw uint64 outputs, identical to n next_u64() calls."""
        if n < 0:
            raise ValueError("block size must be non-negative")
        start = self._counter + 1
        self._counter += n
        idx = np.arange(start, start + n, dtype=np.uint64)
        z = (np.uint64(self._seed) + idx * np.uint64(_GAMMA))
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MUL1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MUL2)
        return z ^ (z >> np.uint64(31))

    def uniform(self, shape=None) -> np.ndarray | float:
        """Uniform floats in the half-open interval [0, 1)."""
        if shape is None:
            return (self.next_u64() >> 11) * _INV53
        n = int(np.prod(shape))
        u = (self._next_block(n) >> np.uint64(11)).astype(np.float64) * _INV53
        return u.reshape(shape)

    def uniform_open(self, shape=None) -> np.ndarray | float:
        """Uniform floats strictly inside (0, 1).

        Midpoint offset keeps both endpoints unreachable: the smallest
        value is 2**-54 and the largest is 1 - 2**-54.
        """
        if shape is None:
            return ((self.next_u64() >> 11) + 0.5) * _INV53
        n = int(np.prod(shape))
        u = ((self._next_block(n) >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53
        return u.reshape(shape)

    def normal(self, shape=None) -> np.ndarray | float:
        """Standard normal samples via Box-Muller (two uniforms per pair)."""
        if shape is None:
            return float(self.normal((1,))[0])
        n = int(np.prod(shape))
        pairs = (n + 1) // 2
        u1 = self.uniform_open((pairs,))
        u2 = self.uniform((pairs,))
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return out.reshape(shape)

    def integer(self, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection (no modulo bias)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (_MASK64 + 1) - ((_MASK64 + 1) % bound)
        while True:
            z = self.next_u64()
            if z < limit:
                return z % bound

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.integer(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> list[int]:
        order = list(range(n))
        self.shuffle(order)
        return order
