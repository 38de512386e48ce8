import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from idea_farr.errors import DomainError, EstimationError, ValidationError
from idea_farr.farr import (FarrEstimate, ci_coverage, compute_k_series, d_to_k,
                            detect_waves, k_to_d, pool_k, z_quantile)
from idea_farr.idea import IdeaParams
from idea_farr.timeseries import GenerationSeries

from conftest import idea_series


def series(values, i0=0):
    return GenerationSeries(values, 7, i0)


def est(k, t=0, var=0.1):
    return FarrEstimate(t, True, k, var, k * 0.5, k * 2)


class TestKSeries:
    def test_constant_ratio(self):
        (e,) = compute_k_series(series([1, 2, 4, 8]))
        assert e.valid and e.k == 1

    def test_idea_tetrad(self):
        (e,) = compute_k_series(idea_series(2, 0.1, 4))
        assert e.k == pytest.approx(0.6830134553650707, rel=1e-12)
        assert e.t_start == 1

    def test_log_variance(self):
        (e,) = compute_k_series(series([10, 20, 40, 80]))
        assert e.log_k_variance == pytest.approx(0.1875, rel=1e-15)

    def test_nonpositive_invalid(self):
        (e,) = compute_k_series(series([5, -1, 3, 4]))
        assert not e.valid and e.k is None and e.ci_low is None
        (e,) = compute_k_series(series([5, 0, 3, 4]))
        assert not e.valid

    def test_sliding_windows(self):
        out = compute_k_series(series([1, 2, 3, -4, 5, 6, 7, 8], i0=10))
        assert [e.t_start for e in out] == [10, 11, 12, 13, 14]
        assert [e.valid for e in out] == [False, False, False, False, True]

    def test_too_short(self):
        with pytest.raises(ValidationError):
            compute_k_series(series([1, 2, 3]))

    def test_exact_ratio_against_fractions(self):
        vals = [7, 13, 29, 31, 17, 5]
        out = compute_k_series(series(vals))
        for j, e in enumerate(out):
            a, b, c, d = (Fraction(v) for v in vals[j:j + 4])
            assert e.k == pytest.approx(float((d / c) / (b / a)), rel=1e-15)

    def test_ci_against_scipy_quantile(self):
        (e,) = compute_k_series(series([120, 150, 170, 160]), confidence_level=0.9)
        z = norm.ppf(0.95)
        half = z * math.sqrt(1 / 120 + 1 / 150 + 1 / 170 + 1 / 160)
        assert e.ci_low == pytest.approx(e.k * math.exp(-half), rel=1e-12)
        assert e.ci_high == pytest.approx(e.k * math.exp(half), rel=1e-12)
        assert e.ci_low < e.k < e.ci_high

    @pytest.mark.parametrize("level", [0.5, 0.8, 0.95, 0.99, 0.999])
    def test_z_quantile(self, level):
        assert z_quantile(level) == pytest.approx(norm.ppf(0.5 + level / 2), abs=1e-8)

    @pytest.mark.parametrize("level", [0, 1, 1.5])
    def test_bad_level(self, level):
        with pytest.raises(DomainError):
            z_quantile(level)

    @given(st.lists(st.floats(0.5, 1e5), min_size=4, max_size=12), st.floats(1e-3, 1e3))
    def test_scale_invariance(self, values, c):
        base = compute_k_series(series(values))
        scaled = compute_k_series(series([c * v for v in values]))
        for a, b in zip(base, scaled):
            assert b.k == pytest.approx(a.k, rel=1e-10)
            assert b.log_k_variance == pytest.approx(a.log_k_variance / c, rel=1e-10)

    @pytest.mark.parametrize("r0", [0.7, 1.2, 2, 5, 9])
    @pytest.mark.parametrize("d", [-0.02, 0, 0.05, 0.1, 0.3])
    def test_identity_on_idea_curves(self, r0, d):
        for e in compute_k_series(idea_series(r0, d, 20)):
            assert e.k == pytest.approx((1 + d) ** -4, rel=1e-10)


class TestConversions:
    def test_k_one(self):
        assert k_to_d(1) == 0

    def test_rho_squared(self):
        assert k_to_d(0.7225) == pytest.approx(0.08465228909328086, rel=1e-12)

    def test_d_to_k(self):
        assert d_to_k(0.1) == pytest.approx(0.6830134553650707, rel=1e-14)

    @pytest.mark.parametrize("k", [0, -1])
    def test_bad_k(self, k):
        with pytest.raises(DomainError):
            k_to_d(k)

    def test_bad_d(self):
        with pytest.raises(DomainError):
            d_to_k(-1)

    @given(st.floats(-0.9, 10))
    def test_inverse(self, d):
        assert k_to_d(d_to_k(d)) == pytest.approx(d, abs=1e-12)


class TestPool:
    def test_symmetric_logs(self):
        p = pool_k([est(0.5), est(2.0)])
        assert p.k_pooled == pytest.approx(1, rel=1e-15)
        assert p.d_equivalent == pytest.approx(0, abs=1e-15)

    @pytest.mark.parametrize("method", ["geometric_mean", "inverse_variance"])
    def test_single(self, method):
        assert pool_k([est(0.83, var=0.2)], method).k_pooled == pytest.approx(0.83, rel=1e-15)

    @pytest.mark.parametrize("method", ["geometric_mean", "inverse_variance"])
    def test_constant(self, method):
        p = pool_k([est(0.7225, t, var=0.1 * (t + 1)) for t in range(5)], method)
        assert p.k_pooled == pytest.approx(0.7225, rel=1e-14)
        assert p.d_equivalent == pytest.approx(k_to_d(0.7225), rel=1e-12)
        assert p.n_estimates == 5

    def test_inverse_variance_weights(self):
        p = pool_k([est(0.5, var=1.0), est(2.0, var=0.25)], "inverse_variance")
        expected = math.exp((math.log(0.5) * 1 + math.log(2.0) * 4) / 5)
        assert p.k_pooled == pytest.approx(expected, rel=1e-14)

    def test_invalid_skipped(self):
        p = pool_k([FarrEstimate(0, False), est(0.9)])
        assert p.n_estimates == 1

    def test_no_valid(self):
        with pytest.raises(EstimationError):
            pool_k([FarrEstimate(0, False)])
        with pytest.raises(EstimationError):
            pool_k([])

    def test_unknown_method(self):
        with pytest.raises(ValidationError):
            pool_k([est(1.0)], "median")

    @given(st.lists(st.floats(0.01, 100), min_size=1, max_size=20), st.randoms())
    def test_order_and_duplication_invariance(self, ks, rnd):
        items = [est(k, t) for t, k in enumerate(ks)]
        base = pool_k(items).k_pooled
        shuffled = items[:]
        rnd.shuffle(shuffled)
        assert pool_k(shuffled).k_pooled == pytest.approx(base, rel=1e-12)
        assert pool_k(items + items).k_pooled == pytest.approx(base, rel=1e-12)


class TestWaves:
    def test_decelerating(self):
        assert detect_waves([est(0.7, t) for t in range(10)]) == []

    def test_single_run(self):
        ests = [est(k, t) for t, k in enumerate([0.8, 0.9, 2.5, 2.1, 0.7])]
        assert detect_waves(ests, 1.0, 1) == [(2, 2.5)]

    def test_min_run(self):
        ests = [est(k, t) for t, k in enumerate([1.1, 0.9, 1.1])]
        assert detect_waves(ests, 1.0, 2) == []
        assert detect_waves(ests, 1.0, 1) == [(0, 1.1), (2, 1.1)]

    def test_invalid_breaks_run(self):
        ests = [est(1.5, 0), FarrEstimate(1, False), est(1.6, 2)]
        assert detect_waves(ests, 1.0, 2) == []

    def test_run_at_end(self):
        ests = [est(k, t) for t, k in enumerate([0.5, 1.2, 1.3])]
        assert detect_waves(ests, 1.0, 2) == [(1, 1.2)]

    def test_empty(self):
        assert detect_waves([]) == []

    def test_bad_config(self):
        with pytest.raises(DomainError):
            detect_waves([], threshold=0)
        with pytest.raises(DomainError):
            detect_waves([], min_run=0)


class TestCoverage:
    def test_small_run_is_plausible(self):
        cov = ci_coverage(IdeaParams(2, 0.1), scale=100, n_replicates=1000, seed=3)
        assert 0.9 <= cov <= 0.98

    def test_workers_do_not_change_result(self):
        kw = dict(scale=80, n_replicates=400, seed=7)
        assert ci_coverage(IdeaParams(2, 0.1), **kw) == ci_coverage(IdeaParams(2, 0.1), workers=3, **kw)

    def test_tiny_counts_undercover(self):
        # with means near 1 the asymptotic interval is unreliable and zero counts invalidate tetrads
        cov = ci_coverage(IdeaParams(1.0, 0.0), scale=1.0, n_replicates=500, seed=1)
        assert cov < 0.9
