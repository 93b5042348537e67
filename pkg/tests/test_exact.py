"""Exact arithmetic, subset ranking and convex envelope tests."""

import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from privcache.audit import chi_square_quantile
from privcache.exact import (
    Envelope,
    binomial,
    lower_convex_envelope,
    permutations_of,
    sample_permutation,
    subset_rank,
    subset_unrank,
    subsets_of_size,
)


def test_binomial_values():
    assert binomial(8, 2) == 28
    assert binomial(8, 1) == 8
    assert binomial(4, 2) == 6
    assert binomial(5, 0) == 1


def test_binomial_out_of_range_is_zero():
    assert binomial(4, -1) == 0
    assert binomial(4, 5) == 0
    with pytest.raises(ValueError):
        binomial(-1, 0)


def test_subsets_lexicographic():
    assert list(subsets_of_size(range(4), 1)) == [(0,), (1,), (2,), (3,)]
    assert len(list(subsets_of_size(range(8), 2))) == 28
    assert list(subsets_of_size(range(3), 5)) == []
    assert list(subsets_of_size(range(3), -1)) == []


def test_rank_of_first_subset_is_zero():
    assert subset_rank(range(8), (0, 1)) == 0


def test_rank_matches_enumeration_order():
    for n in range(0, 9):
        for k in range(0, n + 1):
            for i, sub in enumerate(subsets_of_size(range(n), k)):
                assert subset_rank(range(n), sub) == i
                assert subset_unrank(range(n), k, i) == sub


def test_rank_unrank_round_trip_n12():
    ground = range(12)
    for k in (0, 1, 5, 6, 12):
        for sub in subsets_of_size(ground, k):
            assert subset_unrank(ground, k, subset_rank(ground, sub)) == sub


def test_rank_rejects_bad_subsets():
    with pytest.raises(ValueError):
        subset_rank(range(4), (0, 9))
    with pytest.raises(ValueError):
        subset_unrank(range(4), 2, 6)


def test_permutations_small():
    assert list(permutations_of([0, 1])) == [(0, 1), (1, 0)]
    assert len(list(permutations_of(range(5)))) == 120


def test_sample_permutation_uniform_smoke():
    # chi-square over all 24 orderings of [0..3] from 1e5 draws
    rng = random.Random(12345)
    counts = {}
    draws = 100_000
    for _ in range(draws):
        p = sample_permutation(range(4), rng)
        counts[p] = counts.get(p, 0) + 1
    assert len(counts) == 24
    expected = draws / 24
    stat = sum((c - expected) ** 2 / expected for c in counts.values())
    assert stat < chi_square_quantile(23, 0.999)


def test_envelope_two_points():
    env = lower_convex_envelope([(0, 2), (1, 0)])
    assert env.breakpoints == ((Fraction(0), Fraction(2)), (Fraction(1), Fraction(0)))
    assert env.value_at(Fraction(1, 2)) == 1


def test_envelope_drops_point_above_chord():
    # chord between (0,2) and (1,0) passes through (1/2, 1) < 3/2
    env = lower_convex_envelope([(0, 2), (Fraction(1, 2), Fraction(3, 2)), (1, 0)])
    assert env.breakpoints == ((Fraction(0), Fraction(2)), (Fraction(1), Fraction(0)))


def test_envelope_single_point():
    env = lower_convex_envelope([(3, 4)])
    assert env.breakpoints == ((Fraction(3), Fraction(4)),)
    assert env.value_at(3) == 4
    with pytest.raises(ValueError):
        env.value_at(2)


def test_envelope_collinear_keeps_endpoints_only():
    env = lower_convex_envelope([(0, 2), (1, 1), (2, 0)])
    assert env.breakpoints == ((Fraction(0), Fraction(2)), (Fraction(2), Fraction(0)))
    assert env.value_at(1) == 1


def test_envelope_equal_m_keeps_smaller_r():
    env = lower_convex_envelope([(0, 2), (0, 5), (1, 0)])
    assert env.breakpoints[0] == (Fraction(0), Fraction(2))


def test_envelope_empty_input():
    with pytest.raises(ValueError):
        lower_convex_envelope([])


def test_envelope_rejects_nonconvex_breakpoints():
    with pytest.raises(ValueError):
        Envelope(((Fraction(0), Fraction(0)), (Fraction(1), Fraction(2)), (Fraction(2), Fraction(0))))


_points = st.lists(
    st.tuples(
        st.fractions(min_value=-5, max_value=5, max_denominator=8),
        st.fractions(min_value=-5, max_value=5, max_denominator=8),
    ),
    min_size=1,
    max_size=12,
)


@settings(max_examples=200, deadline=None)
@given(_points)
def test_envelope_below_all_points_and_convex(points):
    env = lower_convex_envelope(points)
    for x, y in points:
        assert env.value_at(x) <= y
    slopes = env.slopes()
    assert all(s0 <= s1 for s0, s1 in zip(slopes, slopes[1:]))
    assert set(env.breakpoints) <= {(Fraction(x), Fraction(y)) for x, y in points}


@settings(max_examples=200, deadline=None)
@given(st.integers(-10**6, 10**6), st.integers(1, 10**6), st.integers(-10**6, 10**6), st.integers(1, 10**6))
def test_fraction_addition_cross_multiplication(a, b, c, d):
    assert Fraction(a, b) + Fraction(c, d) == Fraction(a * d + c * b, b * d)
