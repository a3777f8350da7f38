import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tqeval.alias import build_alias_table


def exact(table):
    return [Fraction(a, b) for a, b in table.probabilities()]


def test_single_weight():
    t = build_alias_table([1])
    rng = random.Random(0)
    assert {t.draw(rng) for _ in range(100)} == {0}


def test_uniform_frequencies():
    t = build_alias_table([1, 1, 1, 1])
    assert exact(t) == [Fraction(1, 4)] * 4
    rng = random.Random(1)
    counts = [0] * 4
    for _ in range(40_000):
        counts[t.draw(rng)] += 1
    assert all(abs(c / 40_000 - 0.25) < 0.02 for c in counts)


def test_skewed_frequencies():
    t = build_alias_table([2, 1, 1])
    assert exact(t) == [Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)]
    rng = random.Random(2)
    n = 100_000
    counts = [0] * 3
    for _ in range(n):
        counts[t.draw(rng)] += 1
    for c, p in zip(counts, (0.5, 0.25, 0.25)):
        sigma = (n * p * (1 - p)) ** 0.5
        assert abs(c - n * p) <= 3 * sigma


@pytest.mark.parametrize("bad", [[], [0], [1, -1]])
def test_bad_weights(bad):
    with pytest.raises(ValueError):
        build_alias_table(bad)


@given(st.lists(st.integers(1, 10**12), min_size=1, max_size=40))
def test_probabilities_are_exact(ws):
    t = build_alias_table(ws)
    assert exact(t) == [Fraction(w, sum(ws)) for w in ws]


def test_same_seed_same_draws():
    t = build_alias_table([3, 1, 4, 1, 5])
    r1, r2 = random.Random(9), random.Random(9)
    assert [t.draw(r1) for _ in range(50)] == [t.draw(r2) for _ in range(50)]
