import math

import numpy as np
import pytest

from predex.bayes import (
    DEFAULT_PRIOR_SCALE,
    TwoSampleStat,
    bayes_for_groups,
    classify_evidence,
    jzs_bayes_factor,
    two_sample_stat,
)
from predex.errors import InsufficientDataError


def mc_bf10(t, nu, N, r=DEFAULT_PRIOR_SCALE, n=200_000, seed=123):
    """Monte Carlo oracle: average the H1 likelihood over scale-mixture draws
    (g = r^2 / chi2(1)), divided by the point-null likelihood."""
    rng = np.random.default_rng(seed)
    g = r * r / rng.chisquare(1, size=n)
    a = 1.0 + N * g
    log_like = -0.5 * np.log(a) - (nu + 1) / 2 * np.log1p(t * t / (a * nu))
    log_null = -(nu + 1) / 2 * np.log1p(t * t / nu)
    return float(np.exp(log_like - log_null).mean())


class TestTwoSampleStat:
    def test_pooled_t_hand_example(self):
        stat = two_sample_stat([9, 8, 7], [1, 1, 1])
        assert stat.t == pytest.approx(7 / math.sqrt(1 / 3), rel=1e-12)
        assert stat.t == pytest.approx(12.124355652982135)
        assert stat.dof == 4
        assert stat.effective_n == pytest.approx(1.5)

    def test_identical_groups_give_zero(self):
        assert two_sample_stat([2, 2, 2], [2, 2, 2]).t == 0.0

    def test_small_group_errors(self):
        with pytest.raises(InsufficientDataError):
            two_sample_stat([1.0], [1, 2, 3])

    def test_zero_variance_unequal_means_is_inf_sentinel(self):
        stat = two_sample_stat([5, 5, 5], [1, 1, 1])
        assert math.isinf(stat.t) and stat.t > 0
        res = jzs_bayes_factor(stat)
        assert math.isinf(res.bf10) and res.category == "decisive"


class TestJzs:
    def test_published_anchor_reproduced(self):
        # paired sleep data: t=4.0621, dof=9, N=10 -> 17.2589 in the reference
        # R implementation of the same test
        res = jzs_bayes_factor(TwoSampleStat(4.062128, 9, 10, 10, 10))
        assert res.bf10 == pytest.approx(17.2589, rel=1e-4)

    def test_frozen_oracle_value_for_t1_groups(self):
        res = jzs_bayes_factor(two_sample_stat([9, 8, 7], [1, 1, 1]))
        assert res.bf10 == pytest.approx(mc_bf10(12.124355652982135, 4, 1.5), rel=0.02)
        assert res.bf10 == pytest.approx(57.6365, rel=1e-4)
        assert res.category == "strong"

    def test_null_favored_at_t_zero(self):
        for nu, N in [(8, 4), (48, 12)]:
            assert jzs_bayes_factor(TwoSampleStat(0.0, nu, N, 5, 5)).bf10 < 1

    def test_matches_monte_carlo_grid(self):
        for t in (0.0, 1.0, 2.0, 5.0):
            for nu in (8, 48):
                for N in (4, 12):
                    quad = jzs_bayes_factor(TwoSampleStat(t, nu, N, 5, 5)).bf10
                    mc = mc_bf10(t, nu, N)
                    assert quad == pytest.approx(mc, rel=0.02)

    def test_strictly_increasing_in_abs_t(self):
        ts = [0.0, 0.5, 1.0, 2.0, 3.5, 5.0, 8.0]
        values = [jzs_bayes_factor(TwoSampleStat(t, 20, 6, 10, 12)).bf10 for t in ts]
        assert all(b > a for a, b in zip(values, values[1:]))
        neg = jzs_bayes_factor(TwoSampleStat(-2.0, 20, 6, 10, 12)).bf10
        pos = jzs_bayes_factor(TwoSampleStat(2.0, 20, 6, 10, 12)).bf10
        assert neg == pytest.approx(pos, rel=1e-9)

    def test_log_matches_bf(self):
        res = jzs_bayes_factor(TwoSampleStat(2.0, 20, 6, 10, 12))
        assert res.log_bf10 == pytest.approx(math.log(res.bf10), abs=1e-12)

    def test_huge_t_overflows_to_decisive_sentinel(self):
        res = jzs_bayes_factor(TwoSampleStat(110.0, 4998, 126.0, 130, 4870))
        assert math.isinf(res.bf10)
        assert math.isfinite(res.log_bf10)
        assert res.category == "decisive"

    def test_prior_scale_changes_result(self):
        stat = TwoSampleStat(2.0, 20, 6, 10, 12)
        medium = jzs_bayes_factor(stat).bf10
        wide = jzs_bayes_factor(stat, prior_scale=1.0).bf10
        assert medium != pytest.approx(wide)


class TestClassify:
    @pytest.mark.parametrize(
        "bf,expected",
        [
            (1.0, "none-or-bare"),
            (3.1999, "none-or-bare"),
            (3.2, "substantial"),
            (9.9999, "substantial"),
            (10.0, "strong"),
            (99.9999, "strong"),
            (100.0, "decisive"),
            (1e9, "decisive"),
            (math.inf, "decisive"),
        ],
    )
    def test_thresholds(self, bf, expected):
        assert classify_evidence(bf) == expected


class TestAffineInvariance:
    def test_positive_affine_transform_preserves_everything(self):
        rng = np.random.default_rng(9)
        for _ in range(25):
            inside = rng.normal(5, 2, size=rng.integers(3, 30))
            outside = rng.normal(0, 2, size=rng.integers(3, 60))
            a = float(rng.uniform(0.1, 10))
            b = float(rng.uniform(-100, 100))
            base = bayes_for_groups(inside, outside)
            moved = bayes_for_groups(a * inside + b, a * outside + b)
            assert moved.category == base.category
            if math.isfinite(base.bf10):
                assert moved.bf10 == pytest.approx(base.bf10, rel=1e-9)
