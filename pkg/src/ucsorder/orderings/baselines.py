"""Reference orderings: file order and a seeded random permutation."""

from __future__ import annotations

import numpy as np

from ..graph import Ordering, UCSGraph

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 generator (Steele, Lea & Flood); fixed, platform-independent stream."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in ``[0, bound)`` by rejection (no modulo bias)."""
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            r = self.next()
            if r < limit:
                return r % bound


def random_order(g: UCSGraph, seed: int) -> Ordering:
    """Fisher-Yates shuffle of the ranks driven by :class:`SplitMix64`."""
    n = g.n
    ranks = list(range(n))
    rng = SplitMix64(seed)
    for i in range(n - 1, 0, -1):
        j = rng.below(i + 1)
        ranks[i], ranks[j] = ranks[j], ranks[i]
    return Ordering(np.array(ranks, dtype=np.int64), "random", {"seed": seed})


def original_order(g: UCSGraph) -> Ordering:
    # vertex indices already follow order of appearance in the source file
    return Ordering(np.arange(g.n, dtype=np.int64), "original", {})
