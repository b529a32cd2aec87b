"""Threshold-profile behavior: the report map, generators, composition, and
dense-limit slopes."""

import numpy as np
import pytest

from ordlab import (
    DenseScale,
    Normal,
    PiecewiseLinearMap,
    ReportingMixture,
    ThresholdProfile,
    Uniform,
    avg_slope,
    compose_subjective,
    dense_refine,
    dense_slope,
    linear_profile,
    report,
    sampled_profile,
)
from ordlab.errors import DomainError, InvalidProfileError


class TestReport:
    def test_value_at_threshold_maps_down(self):
        assert report(ThresholdProfile((0.0,)), 0.0) == 0

    def test_value_above_single_threshold(self):
        assert report(ThresholdProfile((0.0,)), 0.1) == 1

    def test_eleven_point_profile(self):
        p = ThresholdProfile(tuple(float(-5 + r) for r in range(10)))
        assert report(p, 0.3) == 6  # thresholds strictly below: -5..0

    def test_monotone_and_left_continuous_on_grid(self):
        p = ThresholdProfile((-1.0, 0.0, 0.0, 2.5))
        hs = np.linspace(-3.0, 4.0, 1401)
        rs = report(p, hs)
        assert np.all(np.diff(rs) >= 0)
        for tau in p.thresholds:
            assert report(p, tau) <= report(p, tau + 1e-12)
            assert report(p, tau) == report(p, tau - 0.0)

    def test_threshold_equivalence(self):
        # report(h) <= r iff h <= tau(r), for every category below the top
        p = ThresholdProfile((-0.5, 0.25, 1.0))
        hs = np.linspace(-2.0, 2.0, 801)
        rs = report(p, hs)
        for r, tau in enumerate(p.thresholds):
            assert np.array_equal(rs <= r, hs <= tau)

    def test_category_sum_identity(self):
        # the report equals the count of strictly exceeded thresholds
        p = ThresholdProfile((-1.0, -0.2, 0.4, 0.9))
        hs = np.linspace(-2.0, 2.0, 401)
        direct = report(p, hs)
        summed = sum((hs > tau).astype(int) for tau in p.thresholds)
        assert np.array_equal(direct, summed)


class TestLinearProfile:
    def test_literal_spacing(self):
        p = linear_profile(0.0, 10.0, 10, mode="paper_eq5")
        assert p.thresholds == tuple(float(r) for r in range(10))

    def test_endpoint_exact_two(self):
        assert linear_profile(0.0, 1.0, 2, mode="endpoint_exact").thresholds == (0.0, 1.0)

    def test_binary_uses_lower_endpoint(self):
        assert linear_profile(-1.0, 1.0, 1, mode="paper_eq5").thresholds == (-1.0,)
        assert linear_profile(-1.0, 1.0, 1, mode="endpoint_exact").thresholds == (-1.0,)

    def test_crossed_endpoints_rejected(self):
        with pytest.raises(InvalidProfileError):
            linear_profile(1.0, 0.0, 5)

    def test_endpoint_exact_hits_upper(self):
        p = linear_profile(-2.0, 3.0, 7, mode="endpoint_exact")
        assert p.thresholds[0] == -2.0
        assert p.thresholds[-1] == pytest.approx(3.0, abs=1e-15)


class TestSampledProfile:
    def test_sorted_within_support(self):
        p = sampled_profile(Uniform(0.1, 3.0), 3, seed=4)
        taus = np.array(p.thresholds)
        assert np.all(np.diff(taus) >= 0)
        assert np.all((taus >= 0.1) & (taus <= 3.0))

    def test_degenerate_point_mass(self):
        p = ThresholdProfile((2.0, 2.0, 2.0))
        assert report(p, 2.0) == 0
        assert report(p, 2.0 + 1e-12) == 3

    def test_normal_thresholds_nondecreasing(self):
        p = sampled_profile(Normal(2.0, 1.0), 10, seed=5)
        assert np.all(np.diff(p.thresholds) >= 0)

    def test_deterministic(self):
        a = sampled_profile(Uniform(0.0, 1.0), 6, seed=9)
        b = sampled_profile(Uniform(0.0, 1.0), 6, seed=9)
        assert a.thresholds == b.thresholds


class TestDenseRefine:
    def test_unit_scale_four_categories(self):
        p = dense_refine(DenseScale(0.0, 1.0), 4, rbar=1)
        assert p.thresholds == (0.0, 0.25, 0.5, 0.75)

    def test_identity_refinement(self):
        base = ThresholdProfile((-1.0, 0.0, 1.0))
        assert dense_refine(base, 1) is base

    def test_gap_spacing(self):
        p = dense_refine(DenseScale(-1.0, 1.0), 100, rbar=1)
        gaps = np.diff(p.thresholds)
        assert gaps.max() == pytest.approx(0.02, abs=1e-12)

    def test_report_converges_to_continuum(self):
        scale = DenseScale(-1.0, 1.0)
        rbar = 3
        hs = np.linspace(-2.0, 2.0, 401)
        target = rbar * np.clip((hs - scale.ell) / scale.length, 0.0, 1.0)
        for n in (4, 16, 64):
            p = dense_refine(scale, n, rbar=rbar)
            approx = report(p, hs) / n
            assert np.max(np.abs(approx - target)) <= rbar / n + 1e-12


class TestCompose:
    def test_identity_map(self):
        p = ThresholdProfile((-1.0, 0.5))
        out = compose_subjective(PiecewiseLinearMap.identity(-5, 5), p)
        assert out.thresholds == p.thresholds

    def test_doubling_halves_thresholds(self):
        double = PiecewiseLinearMap((-10.0, 10.0), (-20.0, 20.0))
        out = compose_subjective(double, ThresholdProfile((0.0, 2.0)))
        assert out.thresholds == (0.0, 1.0)

    def test_shift(self):
        plus1 = PiecewiseLinearMap((-10.0, 10.0), (-9.0, 11.0))
        out = compose_subjective(plus1, ThresholdProfile((0.0,)))
        assert out.thresholds == (-1.0,)

    def test_nonmonotone_rejected(self):
        with pytest.raises(DomainError):
            PiecewiseLinearMap((0.0, 1.0, 2.0), (0.0, 1.0, 0.5))

    def test_report_commutes_with_transform(self):
        tf = PiecewiseLinearMap((-2.0, 0.0, 3.0), (-4.0, 0.5, 6.5))
        p = ThresholdProfile((-1.0, 0.2, 1.4, 5.0))
        composed = compose_subjective(tf, p)
        assert np.all(np.diff(composed.thresholds) >= 0)
        hs = np.linspace(-3.0, 4.0, 997)  # grid avoids the knot set
        assert np.array_equal(report(composed, hs), report(p, tf(hs)))


class TestDenseSlopes:
    def test_interior_unit_slope(self):
        assert dense_slope(DenseScale(0.0, 1.0), 0.5) == 1.0

    def test_partial_overlap(self):
        assert avg_slope(DenseScale(0.0, 1.0), 0.9, 0.2) == pytest.approx(0.5, abs=1e-15)

    def test_outside_support(self):
        assert avg_slope(DenseScale(0.0, 1.0), 2.0, 0.5) == 0.0

    def test_zero_delta_rejected(self):
        with pytest.raises(DomainError):
            avg_slope(DenseScale(0.0, 1.0), 0.5, 0.0)

    def test_avg_slope_tends_to_dense_slope(self):
        scale = DenseScale(-0.5, 2.0)
        for h in (-0.2, 0.3, 1.9):
            target = dense_slope(scale, h)
            for d in (1e-3, 1e-5, 1e-7):
                assert abs(avg_slope(scale, h, d) - target) < 10 * d

    def test_negative_delta_overlap(self):
        # interval runs from y+delta up to y
        assert avg_slope(DenseScale(0.0, 1.0), 0.1, -0.2) == pytest.approx(0.5, abs=1e-12)


class TestMixtureValidation:
    def test_probabilities_sum_to_one(self):
        p = ThresholdProfile((0.0,))
        with pytest.raises(InvalidProfileError):
            ReportingMixture(((0.5, p), (0.6, p)))

    def test_rbar_must_match(self):
        with pytest.raises(InvalidProfileError):
            ReportingMixture(((0.5, ThresholdProfile((0.0,))),
                              (0.5, ThresholdProfile((0.0, 1.0)))))

    def test_equal_weights_exact(self):
        profiles = [ThresholdProfile((float(k),)) for k in range(7)]
        mix = ReportingMixture.equal(profiles)
        assert abs(sum(p for p, _ in mix.entries) - 1.0) <= 1e-12
