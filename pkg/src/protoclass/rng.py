"""Portable deterministic random number generation.

Seeded sampling and synthetic data must reproduce bit-identically across
runs, platforms, and reimplementations in other languages, so platform
default generators are off the table. Everything here is built on
SplitMix64 (Steele, Lea & Flood 2014), a 64-bit generator with published
constants that fits in a dozen lines in any language:

    state += 0x9E3779B97F4A7C15                 (golden gamma)
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    output = z ^ (z >> 31)

all arithmetic modulo 2**64. Derived conveniences (floats, bounded ints,
gaussians, subset draws) are specified exactly below so an independent
oracle can replay them.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """One SplitMix64 step applied to ``x`` as if it were the state."""
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Fold integer keys into ``seed`` to obtain an independent substream seed.

    Defined as: s = seed; for each key k: s = mix64(s XOR k). Used to give
    every (class, role, ...) combination its own generator regardless of
    iteration order.
    """
    s = seed & _MASK64
    for k in keys:
        s = mix64(s ^ (k & _MASK64))
    return s


class SplitMix64:
    """SplitMix64 stream. All draws documented for external replay."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64
        self._spare_gauss: float | None = None

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform in [0, 1): top 53 bits of one u64, scaled by 2**-53."""
        return (self.next_u64() >> 11) * 2.0**-53

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection; no modulo bias."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def next_gaussian(self) -> float:
        """Standard normal via Box-Muller; pairs are drawn together.

        u1 is clamped away from zero with 2**-53 so log(u1) is finite.
        """
        if self._spare_gauss is not None:
            g = self._spare_gauss
            self._spare_gauss = None
            return g
        u1 = self.next_float()
        if u1 <= 0.0:
            u1 = 2.0**-53
        u2 = self.next_float()
        radius = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._spare_gauss = radius * math.sin(theta)
        return radius * math.cos(theta)

    def sample_indices(self, count: int, take: int) -> list[int]:
        """Draw ``take`` distinct indices from range(count) without replacement.

        Partial Fisher-Yates: for i in 0..take-1 swap position i with a
        uniformly drawn position in [i, count); the result is the first
        ``take`` slots. Requires take <= count.
        """
        if take > count:
            raise ValueError("cannot take more indices than available")
        idx = list(range(count))
        for i in range(take):
            j = i + self.next_below(count - i)
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:take]
