"""组合测试函数 Z、Y_dichotomy、Y_sine"""

import math

import numpy as np
import pytest

from discrepancy_lab import settings
from discrepancy_lab.discrepancy import sample_uniform
from discrepancy_lab.exceptions import UnsupportedModeError
from discrepancy_lab.pointset import generate_random
from discrepancy_lab.testfn import (build_Y_dichotomy, build_Y_sine, build_Z, dichotomy_split, inner_product,
                                    lp_norm_test_function, survival_report, tail_distribution,
                                    tail_range_limit, truncated_exp_norm)

SIGMAS = 4.0


class TestZ:
    def test_shapes_in_plane(self, random_2d):
        z = build_Z(random_2d, n=2)
        assert [s.r for s in z.shapes] == [(0, 2), (1, 1), (2, 0)]
        assert z.n == 2

    def test_shape_count_in_three_dimensions(self, random_3d):
        assert len(build_Z(random_3d, n=6).shapes) == 28

    def test_default_level(self, hammersley_64):
        assert build_Z(hammersley_64).n == 7

    @pytest.mark.parametrize("dim", [2, 3])
    @pytest.mark.parametrize("n", [4, 8, 12])
    def test_exact_l2(self, dim, n):
        z = build_Z(generate_random(dim, 64, seed=n), n=n)
        expected = math.comb(n + dim - 1, dim - 1) / n ** (dim - 1)
        assert z.l2_norm_squared_exact() == pytest.approx(expected, rel=1e-9)

    def test_exact_inner_matches_monte_carlo(self, hammersley_64):
        z = build_Z(hammersley_64)
        exact = inner_product(hammersley_64, z)
        mc = inner_product(hammersley_64, z, mode="monte_carlo", samples=100_000, seed=3)
        assert exact.method == "exact" and exact.std_error == 0.0
        assert abs(exact.value - mc.value) <= SIGMAS * mc.std_error

    def test_zero_scale_gives_zero(self, random_2d):
        assert inner_product(random_2d, build_Z(random_2d).scaled(0.0)).value == 0.0

    def test_unknown_mode(self, random_2d):
        with pytest.raises(ValueError):
            inner_product(random_2d, build_Z(random_2d, n=2), mode="guess")

    def test_cache_reuses_functions(self, random_2d, lab_db):
        first = build_Z(random_2d, cache=lab_db)
        assert lab_db.get_statistics()["r_functions"] == len(first.shapes)
        second = build_Z(random_2d, cache=lab_db)
        assert first.groups == second.groups


class TestYDichotomy:
    def test_divisor(self, random_3d):
        y = build_Y_dichotomy(random_3d, 1 / 3, n=9)
        assert y.q == pytest.approx(2.0801, abs=1e-4)
        assert y.epsilon == 1 / 3

    def test_is_scaled_z(self, random_3d):
        z = build_Z(random_3d)
        y = build_Y_dichotomy(random_3d, 1 / 3)
        points, _, _ = sample_uniform(3, 2000, seed=1)
        np.testing.assert_array_equal(y.evaluate(points), z.evaluate(points) / y.q)
        assert inner_product(random_3d, y).value == pytest.approx(inner_product(random_3d, z).value / y.q, rel=1e-12)
        assert math.sqrt(y.l2_norm_squared_exact()) == pytest.approx(
            math.sqrt(z.l2_norm_squared_exact()) / y.q, rel=1e-12)

    def test_components_carry_common_weight(self, random_3d):
        y = build_Y_dichotomy(random_3d, 1 / 3, n=4)
        components = y.components()
        assert len(components) == math.comb(4 + 2, 2)
        assert [f.shape for _, f in components] == y.shapes
        assert all(weight == 0.25 / y.q for weight, _ in components)

    @pytest.mark.parametrize("epsilon", [0.0, 0.6])
    def test_epsilon_range(self, random_3d, epsilon):
        with pytest.raises(ValueError):
            build_Y_dichotomy(random_3d, epsilon)


class TestYSine:
    def test_only_three_dimensions(self, random_2d):
        with pytest.raises(UnsupportedModeError):
            build_Y_sine(random_2d, 0.1)
        assert build_Y_sine(random_2d, 0.1, allow_any_dimension=True).kind == "Y_sine"

    def test_groups_split_first_coordinate(self, random_3d):
        y = build_Y_sine(random_3d, 0.1, n=6)
        assert len(y.groups) == 3
        for j, group in enumerate(y.groups, start=1):
            assert all(f.shape.r[0] == j and f.shape.order == 6 for f in group)
            assert len(group) == 6 - j + 1

    def test_bounded(self, random_3d):
        y = build_Y_sine(random_3d, 0.5)
        points, _, _ = sample_uniform(3, 5000, seed=2)
        assert np.all(np.abs(y.evaluate(points)) <= math.sqrt(y.n) / 2)

    def test_single_group_bound(self, random_3d):
        y = build_Y_sine(random_3d, 0.9, n=2)
        points, _, _ = sample_uniform(3, 5000, seed=3)
        assert np.all(np.abs(y.evaluate(points)) <= 1 / math.sqrt(2))

    def test_exact_mode_unsupported(self, random_3d):
        y = build_Y_sine(random_3d, 0.1)
        with pytest.raises(UnsupportedModeError):
            inner_product(random_3d, y)
        with pytest.raises(UnsupportedModeError):
            y.components()
        report = inner_product(random_3d, y, mode="monte_carlo", samples=5000, seed=4)
        assert report.method == "monte_carlo"
        assert report.std_error > 0

    def test_default_constant(self, random_3d):
        assert build_Y_sine(random_3d, n=4).c == settings.DEFAULT_SINE_C

    @pytest.mark.parametrize("c", [0.0, 1.0])
    def test_constant_range(self, random_3d, c):
        with pytest.raises(ValueError):
            build_Y_sine(random_3d, c)


class TestTails:
    def test_survival_starts_at_one_and_decreases(self, random_2d):
        z = build_Z(random_2d, n=6)  # 7 个形状，Σ ±1 不为 0
        report = tail_distribution(z, [0.0, 0.2, 0.4, 0.8, 1.2], samples=20_000, seed=5, limit_range=False)
        assert report.survival[0] == 1.0
        assert all(b <= a for a, b in zip(report.survival, report.survival[1:]))

    def test_sparse_thresholds_excluded(self):
        values = np.linspace(-1, 1, 100)
        report = survival_report(values, [0.5, 0.95, 0.99], "Z", 100, 0)
        assert [t for t, _ in report.excluded] == [0.95, 0.99]
        assert not report.has_fit

    def test_gaussian_fit(self):
        values = np.random.default_rng(6).standard_normal(200_000)
        thresholds = [0.25 * k for k in range(1, 13)]
        report = survival_report(values, thresholds, "Z", 200_000, 6)
        assert report.has_fit
        assert report.fit_b > 0
        for t, s in zip(thresholds, report.survival):
            if t in report.fitted_thresholds:
                assert s <= report.envelope(t) * (1 + 1e-12)

    def test_range_limit(self):
        assert tail_range_limit(16, 2) == pytest.approx(1.0)
        assert tail_range_limit(13, 3) == pytest.approx(13 ** (1 / 30))

    def test_range_limit_disabled(self, monkeypatch):
        monkeypatch.setattr(settings, "TAIL_RANGE_CONSTANT", None)
        assert tail_range_limit(13, 3) is None

    def test_thresholds_must_increase(self):
        with pytest.raises(ValueError):
            survival_report(np.ones(10), [0.5, 0.5], "Z", 10, 0)

    @pytest.mark.slow
    def test_z_is_subgaussian_in_three_dimensions(self):
        ps = generate_random(3, 2 ** 12, seed=settings.DEFAULT_SEED)
        report = tail_distribution(build_Z(ps), settings.DEFAULT_TAIL_THRESHOLDS, samples=100_000, seed=7)
        assert report.has_fit
        assert report.fit_b > 0
        assert report.r_squared >= settings.TAIL_MIN_R_SQUARED


class TestNormsAndSplits:
    def test_z_moments_bounded(self, random_3d):
        z = build_Z(random_3d)
        norm = lp_norm_test_function(z, 4.0, samples=20_000, seed=8)
        assert 0 < norm.value < 10

    def test_dichotomy_split(self, random_3d):
        y = build_Y_dichotomy(random_3d, 1 / 3)
        split = dichotomy_split(random_3d, y, samples=10_000, seed=9)
        assert split.holder_holds
        assert 0 <= split.large_measure <= 1

    def test_truncated_exp_norm_above_range(self, random_2d):
        z = build_Z(random_2d, n=2)  # |Z| <= 3 / sqrt(2)
        result = truncated_exp_norm(z, 10.0, samples=1000, seed=1)
        assert result.norm.value == 0.0
        assert result.measure == 0.0

    def test_truncated_exp_norm(self, random_3d):
        result = truncated_exp_norm(build_Z(random_3d), 0.5, samples=10_000, seed=2)
        assert result.norm.value > 0
        assert 0 < result.measure < 1
        assert result.ratio == pytest.approx(result.norm.value * 0.5)
