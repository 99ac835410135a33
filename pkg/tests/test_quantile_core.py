import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbquantile.quantile_core import (
    QuantileQuery,
    SortedSample,
    g_index,
    g_indices,
    quantile_estimate,
    rank_position,
    sort_sample,
)
from pbquantile.rng import RandomSource

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)
open_q = st.floats(min_value=1e-6, max_value=1 - 1e-6)


def normal_ppf(q):
    return float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(q) - 1))


class TestRandomSource:
    def test_replay(self):
        a = RandomSource(5, 3).uniforms(10)
        b = RandomSource(5, 3).uniforms(10)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        a = RandomSource(5, 0).uniforms(1000)
        b = RandomSource(5, 1).uniforms(1000)
        c = RandomSource(5).child(1).uniforms(1000)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.1

    def test_fresh_rewinds(self):
        src = RandomSource(9)
        first = src.uniform()
        src.uniform()
        assert src.fresh().uniform() == first

    @pytest.mark.parametrize("seed", [-1, 1 << 64])
    def test_rejects_out_of_range_seed(self, seed):
        with pytest.raises(ValueError):
            RandomSource(seed)


class TestQuery:
    @pytest.mark.parametrize("q", [0.0, 1.0, -0.1, 1.5, float("nan")])
    def test_rejects_boundary(self, q):
        with pytest.raises(ValueError):
            QuantileQuery(q)

    def test_float(self):
        assert float(QuantileQuery(0.25)) == 0.25


class TestGIndex:
    def test_integer_position_is_deterministic(self):
        rng = RandomSource(1)
        assert {g_index(0.5, 9, rng) for _ in range(200)} == {5}

    def test_integer_position_consumes_no_randomness(self):
        rng = RandomSource(1)
        g_index(0.5, 9, rng)
        assert rng.uniform() == RandomSource(1).uniform()

    def test_float_noise_snaps_to_integer(self):
        # 0.3 * 10 == 3.0000000000000004 in binary floating point
        assert rank_position(0.3, 9) == (3, 0.0)

    def test_median_even_n_is_fair_coin(self):
        rng = RandomSource(2)
        draws = np.array([g_index(0.5, 10, rng) for _ in range(20_000)])
        assert set(np.unique(draws)) == {5, 6}
        assert abs((draws == 6).mean() - 0.5) < 3 * math.sqrt(0.25 / 20_000)

    def test_q_01_n_10_frequencies(self):
        # 0.1 * 11 = 1.1: index 2 with probability 0.1, index 1 otherwise
        rng = RandomSource(3)
        n = 10**6
        draws = np.fromiter((g_index(0.1, 10, rng) for _ in range(n)), dtype=np.int64, count=n)
        assert set(np.unique(draws)) == {1, 2}
        sigma = math.sqrt(0.1 * 0.9 / n)
        assert abs((draws == 2).mean() - 0.1) < 3 * sigma

    def test_chi_square_against_remainder(self):
        from scipy import stats
        rng = RandomSource(4)
        n = 10**5
        lo, r = rank_position(0.37, 40)  # 15.17
        draws = np.array([g_index(0.37, 40, rng) for _ in range(n)])
        observed = [(draws == lo).sum(), (draws == lo + 1).sum()]
        chi2 = stats.chisquare(observed, [n * (1 - r), n * r])
        assert chi2.pvalue > 1e-3

    def test_clamping(self):
        rng = RandomSource(5)
        # 0.99 * 3 = 2.97 can round up to 3 > n = 2
        assert all(1 <= g_index(0.99, 2, rng) <= 2 for _ in range(200))
        assert all(g_index(0.01, 5, rng) == 1 for _ in range(200))
        raw = {g_index(0.01, 5, rng, clamp=False) for _ in range(500)}
        assert raw == {0, 1}

    def test_rejects_bad_n(self):
        with pytest.raises(ValueError):
            g_index(0.5, 0, RandomSource(0))

    @given(q=open_q, n=st.integers(1, 10**6), u=st.floats(0, 1, exclude_max=True))
    def test_vectorised_matches_scalar_rule(self, q, n, u):
        lo, r = rank_position(q, n)
        expected = lo + (1 if u < r else 0)
        assert g_indices(q, np.array([n]), np.array([u]))[0] == expected


class TestSortSample:
    def test_examples(self):
        assert list(sort_sample([3, 1, 2]).values) == [1, 2, 3]
        assert list(sort_sample([5]).values) == [5]

    def test_sorted_input_idempotent(self):
        x = np.arange(10**6, dtype=float)
        np.testing.assert_array_equal(sort_sample(x).values, x)

    @pytest.mark.parametrize("bad", [[], [1.0, float("nan")]])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            sort_sample(bad)

    def test_unsorted_rejected_by_constructor(self):
        with pytest.raises(ValueError):
            SortedSample([2.0, 1.0])

    def test_immutable(self):
        s = sort_sample([2.0, 1.0])
        with pytest.raises(ValueError):
            s.values[0] = 5.0

    @given(st.lists(finite, min_size=1, max_size=200))
    def test_permutation_and_order(self, raw):
        out = sort_sample(raw).values
        assert np.all(out[1:] >= out[:-1])
        assert sorted(out.tolist()) == sorted(float(v) for v in raw)


class TestQuantileEstimate:
    def test_middle_element(self):
        s = sort_sample(range(1, 10))
        assert quantile_estimate(s, 0.5, RandomSource(0)) == 5

    def test_two_point(self):
        s = sort_sample([10, 20])
        rng = RandomSource(7)
        draws = np.array([quantile_estimate(s, 0.5, rng) for _ in range(10_000)])
        assert set(draws) == {10.0, 20.0}
        assert abs((draws == 20).mean() - 0.5) < 0.015

    @settings(max_examples=200)
    @given(st.lists(finite, min_size=1, max_size=50), open_q, st.integers(0, 2**32))
    def test_always_a_sample_member(self, raw, q, seed):
        s = sort_sample(raw)
        assert quantile_estimate(s, q, RandomSource(seed)) in set(s.values.tolist())

    def test_normal_decile(self):
        gen = RandomSource(11).generator
        est = [quantile_estimate(sort_sample(gen.standard_normal(2000)), 0.1, RandomSource(12, i))
               for i in range(10_000)]
        assert abs(np.mean(est) - normal_ppf(0.1)) < 0.05
