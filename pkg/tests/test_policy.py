"""Variance gating, quantile threshold, and offset sampling."""

import numpy as np
import pytest

import depthaug as da
from reference import ks_statistic_uniform, quantile_linear, variance_two_pass

HIGH = da.VarianceClass.HIGH
LOW = da.VarianceClass.LOW


class TestComputeVariance:
    def test_constant_map_is_zero(self):
        assert da.compute_variance(np.full((5, 7), 3.2)) == 0.0

    def test_two_pixel_map_by_hand(self):
        assert da.compute_variance(np.array([[1.0, 3.0]])) == 1.0

    def test_matches_two_pass_oracle(self, rng):
        for _ in range(20):
            z = rng.uniform(0, 50, size=(16, 16)) * rng.choice([0.01, 1.0, 100.0])
            got = da.compute_variance(z)
            want = variance_two_pass(z.ravel().tolist())
            assert got == pytest.approx(want, rel=1e-9)

    def test_population_not_sample(self):
        z = np.array([[0.0, 2.0]])
        assert da.compute_variance(z) == 1.0  # sample variance would be 2.0

    def test_empty_and_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            da.compute_variance(np.empty((0, 0)))
        with pytest.raises(ValueError):
            da.compute_variance(np.array([[1.0, np.nan]]))


class TestComputeThreshold:
    def test_constant_list(self):
        assert da.compute_threshold([5, 5, 5, 5]) == 5.0

    def test_four_element_reference_value(self):
        assert da.compute_threshold([0, 1, 2, 3]) == 0.75

    def test_singleton(self):
        assert da.compute_threshold([7]) == 7.0

    def test_order_invariant(self):
        assert da.compute_threshold([3, 0, 2, 1]) == 0.75

    def test_matches_sort_oracle_exactly_on_random_lists(self, rng):
        for _ in range(1000):
            n = int(rng.integers(1, 50))
            scale = float(rng.choice([1e-6, 1.0, 1e6]))
            values = (rng.uniform(0, 1, n) * scale).tolist()
            assert da.compute_threshold(values) == quantile_linear(values, 0.25)

    def test_within_min_max(self, rng):
        for _ in range(50):
            values = rng.uniform(0, 100, int(rng.integers(1, 30)))
            tau = da.compute_threshold(values)
            assert values.min() <= tau <= values.max()

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            da.compute_threshold([])


class TestClassify:
    def test_boundary_is_high(self):
        assert da.classify(2.5, 2.5) is HIGH

    def test_zero_below_positive_threshold_is_low(self):
        assert da.classify(0.0, 0.1) is LOW

    def test_just_above_is_high(self):
        assert da.classify(2.5 + 1e-12, 2.5) is HIGH

    def test_partition_fraction_near_first_quartile(self, rng):
        for _ in range(5):
            values = rng.uniform(0.1, 40.0, 200)
            tau = da.compute_threshold(values)
            low_frac = np.mean([da.classify(v, tau) is LOW for v in values])
            assert 0.20 <= low_frac <= 0.30

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            da.classify(-1.0, 0.5)
        with pytest.raises(ValueError):
            da.classify(1.0, np.nan)


class TestOffsetPolicy:
    def test_defaults(self):
        policy = da.OffsetPolicy()
        assert policy.mode == da.ADAPTIVE
        assert (policy.alpha_scale, policy.beta_scale) == (0.5, 0.2)
        assert (policy.range_lo, policy.range_hi) == (-4.0, 15.0)

    @pytest.mark.parametrize("kwargs", [
        dict(mode="other"),
        dict(alpha_scale=-0.1),
        dict(beta_scale=np.inf),
        dict(range_lo=3.0, range_hi=-3.0),
        dict(tau=-1.0),
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            da.OffsetPolicy(**kwargs)


class TestSeedSpec:
    def test_same_key_same_stream(self):
        a = da.SeedSpec(7, "img_x", 3).generator().uniform(0, 1, 5)
        b = da.SeedSpec(7, "img_x", 3).generator().uniform(0, 1, 5)
        assert np.array_equal(a, b)

    def test_distinct_keys_distinct_streams(self):
        base = da.SeedSpec(7, "img_x", 0).generator().uniform(0, 1)
        assert base != da.SeedSpec(8, "img_x", 0).generator().uniform(0, 1)
        assert base != da.SeedSpec(7, "img_y", 0).generator().uniform(0, 1)
        assert base != da.SeedSpec(7, "img_x", 1).generator().uniform(0, 1)


class TestOffsetInterval:
    def test_adaptive_high(self):
        policy = da.OffsetPolicy(tau=1.0)
        assert da.offset_interval(policy, HIGH, 2.0, 10.0) == (-1.0, 2.0)

    def test_adaptive_low_is_none(self):
        assert da.offset_interval(da.OffsetPolicy(tau=1.0), LOW, 2.0, 10.0) is None

    def test_fixed_ignores_class(self):
        policy = da.OffsetPolicy(mode=da.FIXED_RANGE)
        assert da.offset_interval(policy, LOW, 2.0, 10.0) == (-4.0, 15.0)
        assert da.offset_interval(policy, HIGH, 2.0, 10.0) == (-4.0, 15.0)

    def test_rejects_bad_depth_bounds(self):
        policy = da.OffsetPolicy(tau=1.0)
        with pytest.raises(ValueError):
            da.offset_interval(policy, HIGH, -1.0, 10.0)
        with pytest.raises(ValueError):
            da.offset_interval(policy, HIGH, 11.0, 10.0)
        with pytest.raises(ValueError):
            da.offset_interval(policy, HIGH, np.inf, np.inf)


class TestSampleOffset:
    def test_low_variance_is_exactly_zero(self):
        policy = da.OffsetPolicy(tau=5.0)
        for k in range(20):
            dz = da.sample_offset(policy, LOW, 1.0, 30.0, da.SeedSpec(1, "a", k))
            assert dz == 0.0

    def test_adaptive_draws_in_bounds(self):
        policy = da.OffsetPolicy(tau=0.5)
        draws = np.array([
            da.sample_offset(policy, HIGH, 2.0, 10.0, da.SeedSpec(3, "img", k))
            for k in range(10_000)])
        assert draws.min() >= -1.0 and draws.max() <= 2.0

    def test_fixed_draws_in_bounds(self):
        policy = da.OffsetPolicy(mode=da.FIXED_RANGE)
        draws = np.array([
            da.sample_offset(policy, LOW, 0.0, 1.0, da.SeedSpec(4, "img", k))
            for k in range(10_000)])
        assert draws.min() >= -4.0 and draws.max() <= 15.0

    def test_uniformity_via_ks(self):
        policy = da.OffsetPolicy(tau=0.5)
        draws = [da.sample_offset(policy, HIGH, 2.0, 10.0, da.SeedSpec(9, "u", k))
                 for k in range(10_000)]
        critical = 1.628 / np.sqrt(len(draws))  # 1% significance level
        assert ks_statistic_uniform(draws, -1.0, 2.0) < critical

    def test_order_and_schedule_independent(self):
        policy = da.OffsetPolicy(tau=0.5)
        ids = [f"im{i}" for i in range(50)]
        forward = {i: da.sample_offset(policy, HIGH, 1.0, 9.0, da.SeedSpec(5, i, 0))
                   for i in ids}
        backward = {i: da.sample_offset(policy, HIGH, 1.0, 9.0, da.SeedSpec(5, i, 0))
                    for i in reversed(ids)}
        assert forward == backward

    def test_zero_scales_pin_offset_to_zero(self):
        policy = da.OffsetPolicy(alpha_scale=0.0, beta_scale=0.0, tau=0.0)
        dz = da.sample_offset(policy, HIGH, 2.0, 10.0, da.SeedSpec(0, "x", 0))
        assert dz == 0.0


class TestVarianceStats:
    def test_from_pairs_computes_threshold(self):
        stats = da.VarianceStats.from_pairs([("a", 0.0), ("b", 1.0),
                                             ("c", 2.0), ("d", 3.0)])
        assert stats.tau == 0.75
        assert stats.per_image[1] == ("b", 1.0)
