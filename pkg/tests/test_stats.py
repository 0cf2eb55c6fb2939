import math

import numpy as np
import pytest

from bicomet.stats import (
    HypergeomParams,
    bonferroni_threshold,
    hypergeom_pmf,
    log_binomial,
    overlap_pvalue,
)


def exact_pmf(x, n, m, k):
    """Big-integer rational oracle, independent of the log-space route."""
    return math.comb(m, x) * math.comb(n - m, k - x) / math.comb(n, k)


class TestLogBinomial:
    def test_edge_value(self):
        assert log_binomial(5, 0) == 0.0
        assert log_binomial(5, 5) == 0.0

    def test_small_exact_values(self):
        assert log_binomial(5, 2) == pytest.approx(math.log(10), rel=1e-14)
        assert log_binomial(4, 2) == pytest.approx(math.log(6), rel=1e-14)

    @pytest.mark.parametrize("n,k", [(5, -1), (5, 6), (0, 1)])
    def test_rejects_out_of_range(self, n, k):
        with pytest.raises(ValueError):
            log_binomial(n, k)

    def test_accuracy_up_to_1e6(self):
        def reference(n, k):
            # exact integer binomial where affordable, else a compensated
            # sum of logs (absolute error ~1e-9, far below the tolerance)
            kk = min(k, n - k)
            if kk <= 4000:
                return math.log(math.comb(n, kk))
            return math.fsum(
                math.log(n - i) - math.log(i + 1) for i in range(kk)
            )

        rng = np.random.default_rng(0)
        for n in [10, 1000, 10**4, 10**5, 10**6]:
            ks = {1, 2, 3, n // 2, n - 1}
            ks.update(int(v) for v in rng.integers(1, n, size=8))
            for k in ks:
                assert log_binomial(n, k) == pytest.approx(reference(n, k), rel=1e-12)


class TestHypergeomParams:
    @pytest.mark.parametrize(
        "n,m,k", [(5, 6, 2), (5, 2, 6), (-1, 0, 0), (5, -1, 2), (5, 2, -1)]
    )
    def test_rejects_invalid(self, n, m, k):
        with pytest.raises(ValueError):
            HypergeomParams(n, m, k)

    def test_support(self):
        assert HypergeomParams(10, 4, 3).support() == (0, 3)
        assert HypergeomParams(10, 8, 7).support() == (5, 7)


class TestPmf:
    def test_known_values(self):
        assert hypergeom_pmf(1, HypergeomParams(5, 2, 2)) == pytest.approx(0.6, rel=1e-12)
        assert hypergeom_pmf(2, HypergeomParams(4, 2, 2)) == pytest.approx(1 / 6, rel=1e-12)

    def test_no_successes_in_population(self):
        assert hypergeom_pmf(0, HypergeomParams(10, 0, 5)) == 1.0

    def test_outside_support_is_zero(self):
        params = HypergeomParams(10, 4, 3)
        assert hypergeom_pmf(4, params) == 0.0
        assert hypergeom_pmf(-1, params) == 0.0
        low = HypergeomParams(10, 8, 7)
        assert hypergeom_pmf(4, low) == 0.0

    def test_sums_to_one_on_random_grid(self):
        rng = np.random.default_rng(1)
        cases = [
            (int(rng.integers(1, 1500)), None, None) for _ in range(200)
        ] + [(int(rng.integers(5000, 10**4 + 1)), None, None) for _ in range(8)]
        for n, _, _ in cases:
            m = int(rng.integers(0, n + 1))
            k = int(rng.integers(0, n + 1))
            params = HypergeomParams(n, m, k)
            lo, hi = params.support()
            total = math.fsum(hypergeom_pmf(x, params) for x in range(lo, hi + 1))
            assert total == pytest.approx(1.0, abs=1e-10)

    def test_matches_exact_rationals_sampled(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            n = int(rng.integers(1, 61))
            m = int(rng.integers(0, n + 1))
            k = int(rng.integers(0, n + 1))
            params = HypergeomParams(n, m, k)
            lo, hi = params.support()
            x = int(rng.integers(lo, hi + 1))
            expected = exact_pmf(x, n, m, k)
            assert hypergeom_pmf(x, params) == pytest.approx(expected, rel=1e-12)


class TestOverlapPvalue:
    def test_zero_overlap_is_one(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(1, 500))
            m = int(rng.integers(0, n + 1))
            k = int(rng.integers(0, n + 1))
            assert overlap_pvalue(0, HypergeomParams(n, m, k)) == 1.0

    def test_known_values(self):
        assert overlap_pvalue(2, HypergeomParams(4, 2, 2)) == pytest.approx(1 / 6, rel=1e-12)
        assert overlap_pvalue(1, HypergeomParams(5, 2, 2)) == pytest.approx(0.7, rel=1e-12)

    def test_rejects_out_of_range_overlap(self):
        with pytest.raises(ValueError):
            overlap_pvalue(3, HypergeomParams(5, 2, 2))
        with pytest.raises(ValueError):
            overlap_pvalue(-1, HypergeomParams(5, 2, 2))

    def test_non_increasing_in_overlap(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            n = int(rng.integers(2, 300))
            m = int(rng.integers(1, n + 1))
            k = int(rng.integers(1, n + 1))
            params = HypergeomParams(n, m, k)
            values = [overlap_pvalue(x, params) for x in range(0, min(m, k) + 1)]
            assert all(a >= b for a, b in zip(values, values[1:]))

    def test_complementarity_with_lower_sum(self):
        rng = np.random.default_rng(5)
        for trial in range(300):
            n = int(rng.integers(1, 800 if trial < 290 else 2000))
            m = int(rng.integers(0, n + 1))
            k = int(rng.integers(0, n + 1))
            params = HypergeomParams(n, m, k)
            lo, _ = params.support()
            x = int(rng.integers(0, min(m, k) + 1)) if min(m, k) > 0 else 0
            lower = math.fsum(hypergeom_pmf(v, params) for v in range(lo, x))
            assert overlap_pvalue(x, params) + lower == pytest.approx(1.0, abs=1e-10)

    def test_deep_tail_does_not_underflow_to_garbage(self):
        # exact copy of a 50-node community inside 1000 nodes
        p = overlap_pvalue(50, HypergeomParams(1000, 50, 50))
        assert 0.0 < p < 1e-50
        expected = 1.0 / math.comb(1000, 50)
        assert p == pytest.approx(expected, rel=1e-10)

    @pytest.mark.parametrize(
        "n,m,k,x",
        [
            # overlaps far above the mean but below the support midpoint:
            # a tail-by-length rule would cancel these against 1 and lose
            # 20+ orders of magnitude
            (4707, 435, 948, 210),
            (3709, 252, 179, 73),
            (1889, 102, 94, 43),
        ],
    )
    def test_mid_support_deep_tails_match_exact_rationals(self, n, m, k, x):
        params = HypergeomParams(n, m, k)
        lo, hi = params.support()
        numerator = sum(
            math.comb(m, v) * math.comb(n - m, k - v) for v in range(x, hi + 1)
        )
        exact = numerator / math.comb(n, k)
        assert exact < 1e-30
        assert overlap_pvalue(x, params) == pytest.approx(exact, rel=1e-12)

    def test_random_large_populations_match_exact_rationals(self):
        # integer arithmetic is exact, so the oracle may sum whichever side
        # has fewer terms and complement against the full count
        rng = np.random.default_rng(6)
        for _ in range(150):
            n = int(rng.integers(2, 3000))
            m = int(rng.integers(1, n + 1))
            k = int(rng.integers(1, n + 1))
            params = HypergeomParams(n, m, k)
            lo, hi = params.support()
            x = int(rng.integers(lo, hi + 1))
            total = math.comb(n, k)
            if hi - x <= x - lo:
                numerator = sum(
                    math.comb(m, v) * math.comb(n - m, k - v)
                    for v in range(x, hi + 1)
                )
            else:
                numerator = total - sum(
                    math.comb(m, v) * math.comb(n - m, k - v)
                    for v in range(lo, x)
                )
            exact = numerator / total
            assert overlap_pvalue(x, params) == pytest.approx(exact, rel=1e-10)


class TestBonferroni:
    def test_basic_division(self):
        assert bonferroni_threshold(0.01, 1) == 0.01
        assert bonferroni_threshold(0.01, 100) == pytest.approx(1e-4, rel=1e-15)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            bonferroni_threshold(0.01, 0)
        with pytest.raises(ValueError):
            bonferroni_threshold(0.0, 10)
        with pytest.raises(ValueError):
            bonferroni_threshold(1.5, 10)
