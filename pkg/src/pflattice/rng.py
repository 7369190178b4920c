"""SplitMix64 pseudo-random generator.

Reference: G. L. Steele Jr., D. Lea, C. H. Flood, "Fast splittable
pseudorandom number generators", OOPSLA 2014 (the ``splitmix64`` finalizer
as published by S. Vigna at https://prng.di.unimi.it/splitmix64.c).

The stream is fully specified by the 64-bit seed, so any language can
reproduce the random fields of a benchmark model bit for bit:

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

(all arithmetic modulo 2**64). Uniform doubles use the top 53 bits:
``(x >> 11) * 2**-53``, which lies in [0, 1).
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def randbelow(self, k: int) -> int:
        """Unbiased integer in [0, k) by rejection sampling."""
        if k <= 0:
            raise ValueError("k must be positive")
        limit = (1 << 64) - ((1 << 64) % k)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % k

    def permutation(self, k: int) -> list[int]:
        """Fisher-Yates shuffle of range(k)."""
        items = list(range(k))
        for i in range(k - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
        return items
