"""Walker/Vose alias tables over integer weights.

Everything stays in integers, so the sampled distribution is exactly
proportional to the weights (no float rounding).
"""
from __future__ import annotations

import random
from typing import Sequence


class AliasTable:
    __slots__ = ("n", "total", "prob", "alias")

    def __init__(self, weights: Sequence[int]):
        n = len(weights)
        if n == 0:
            raise ValueError("alias table needs at least one weight")
        if any(w <= 0 for w in weights):
            raise ValueError("alias table weights must be positive")
        W = sum(weights)
        # scaled weights: each cell holds total mass W
        p = [w * n for w in weights]
        prob = [W] * n
        alias = list(range(n))
        small = [i for i in range(n) if p[i] < W]
        large = [i for i in range(n) if p[i] >= W]
        while small and large:
            s = small.pop()
            g = large.pop()
            prob[s] = p[s]
            alias[s] = g
            p[g] += p[s] - W
            (small if p[g] < W else large).append(g)
        self.n, self.total, self.prob, self.alias = n, W, prob, alias

    def draw(self, rng: random.Random) -> int:
        i = rng.randrange(self.n)
        if rng.randrange(self.total) < self.prob[i]:
            return i
        return self.alias[i]

    def probabilities(self) -> list:
        """Exact probabilities as (numerator, denominator) pairs, for tests."""
        num = [0] * self.n
        for i in range(self.n):
            num[i] += self.prob[i]
            num[self.alias[i]] += self.total - self.prob[i]
        return [(x, self.n * self.total) for x in num]


def build_alias_table(weights: Sequence[int]) -> AliasTable:
    return AliasTable(weights)
