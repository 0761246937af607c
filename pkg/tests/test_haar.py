"""二进矩形、Haar 系数、贪心 r-函数"""

import numpy as np
import pytest

from discrepancy_lab import settings
from discrepancy_lab.discrepancy import eval_discrepancy, sample_discrepancy
from discrepancy_lab.exceptions import CapExceededError, DimensionMismatchError, PointSetFormatError
from discrepancy_lab.haar import (DyadicRectangle, RFunction, ShapeVector, all_coefficients,
                                  build_r_function_greedy, eval_haar, eval_r_function, gram_inner,
                                  haar_coefficient, haar_coefficient_exact, inner_product_exact, roth_level,
                                  shapes_of_order)
from discrepancy_lab.numerics import compensated_sum
from discrepancy_lab.pointset import PointSet, generate_random, generate_van_der_corput

from conftest import midpoint_grid


class TestShapes:
    def test_roth_level(self):
        assert [roth_level(n) for n in (1, 2, 3, 4, 64, 65)] == [1, 2, 3, 3, 7, 8]

    def test_order_two_in_plane(self):
        assert [s.r for s in shapes_of_order(2, 2)] == [(0, 2), (1, 1), (2, 0)]

    def test_count_in_three_dimensions(self):
        assert len(shapes_of_order(3, 6)) == 28

    def test_key_and_parse(self):
        shape = ShapeVector((1, 2))
        assert shape.key == "1,2"
        assert str(shape) == "(1,2)"
        assert ShapeVector.parse("(1,2)") == shape

    def test_rectangle_index(self):
        shape = ShapeVector((2, 1))
        rect = DyadicRectangle(shape, (3, 1))
        assert rect.index == 3 | (1 << 2)
        assert DyadicRectangle.from_index(shape, rect.index) == rect
        assert rect.intervals == [(0.75, 1.0), (0.5, 1.0)]
        assert rect.volume == 0.125

    def test_rectangle_position_range(self):
        with pytest.raises(ValueError):
            DyadicRectangle(ShapeVector((1,)), (2,))


class TestCoefficients:
    def test_midpoint_on_unit_interval(self):
        ps = PointSet(np.array([[0.5]]))
        assert haar_coefficient(ps, DyadicRectangle(ShapeVector((0,)), (0,))) == 0.25

    def test_point_outside_rectangle(self):
        ps = PointSet(np.array([[0.25]]))
        assert haar_coefficient(ps, DyadicRectangle(ShapeVector((1,)), (1,))) == -1 / 16

    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_points_at_corner(self, dim):
        ps = PointSet(np.ones((3, dim)))
        rect = DyadicRectangle(ShapeVector((0,) * dim), (0,) * dim)
        assert haar_coefficient(ps, rect) == pytest.approx(-3 * 4.0 ** (-dim), abs=1e-15)

    def test_matches_exact_rational(self, random_2d):
        for shape in shapes_of_order(2, 3):
            for index in range(shape.n_rectangles):
                rect = DyadicRectangle.from_index(shape, index)
                assert haar_coefficient(random_2d, rect) == pytest.approx(
                    float(haar_coefficient_exact(random_2d, rect)), abs=1e-13)

    def test_matches_quadrature(self, hammersley_64):
        # Hammersley 坐标都在 1/64 网格上，中点法积分在 1/1024 网格上是精确的
        grid = midpoint_grid(1024)
        values = eval_discrepancy(hammersley_64, grid)
        for r in [(0, 0), (1, 2), (3, 1), (4, 4), (0, 6)]:
            shape = ShapeVector(r)
            for index in (0, shape.n_rectangles // 3, shape.n_rectangles - 1):
                rect = DyadicRectangle.from_index(shape, index)
                quadrature = compensated_sum(values * eval_haar(rect, grid)) / grid.shape[0]
                assert haar_coefficient(hammersley_64, rect) == pytest.approx(quadrature, abs=1e-9)

    @pytest.mark.slow
    @pytest.mark.parametrize("dim", [2, 3])
    @pytest.mark.parametrize("n_points", [64, 256])
    def test_random_rectangles_match_quadrature(self, dim, n_points):
        # 点落在 1/16 网格上、矩形半边长 >= 1/64：1/64 中点网格上被积函数是分片多重线性的，中点法精确
        rng = np.random.default_rng(dim * 1000 + n_points)
        ps = PointSet(np.floor(rng.random((n_points, dim)) * 16) / 16)
        grid = midpoint_grid(64, dim)
        values = eval_discrepancy(ps, grid)
        for _ in range(100):
            shape = ShapeVector(tuple(int(v) for v in rng.integers(0, 6, size=dim)))
            rect = DyadicRectangle.from_index(shape, int(rng.integers(0, shape.n_rectangles)))
            quadrature = compensated_sum(values * eval_haar(rect, grid)) / grid.shape[0]
            assert haar_coefficient(ps, rect) == pytest.approx(quadrature, abs=1e-9)

    @pytest.mark.slow
    def test_bulk_matches_single_at_order_twelve(self):
        ps = generate_random(2, 256, seed=12)
        for shape in shapes_of_order(2, 12):
            bulk = all_coefficients(ps, shape)
            for index in range(0, shape.n_rectangles, 37):
                assert bulk[index] == haar_coefficient(ps, DyadicRectangle.from_index(shape, index))

    @pytest.mark.parametrize("order", [0, 2, 4])
    def test_bulk_matches_single(self, random_2d, order):
        for shape in shapes_of_order(2, order):
            bulk = all_coefficients(random_2d, shape)
            for index in range(shape.n_rectangles):
                assert bulk[index] == haar_coefficient(random_2d, DyadicRectangle.from_index(shape, index))

    def test_bulk_matches_single_in_three_dimensions(self, faure_3_3_3):
        for shape in shapes_of_order(3, 3):
            bulk = all_coefficients(faure_3_3_3, shape)
            for index in range(shape.n_rectangles):
                assert bulk[index] == haar_coefficient(faure_3_3_3, DyadicRectangle.from_index(shape, index))

    def test_order_cap(self, random_2d, monkeypatch):
        monkeypatch.setattr(settings, "MAX_SHAPE_ORDER", 4)
        with pytest.raises(CapExceededError):
            all_coefficients(random_2d, ShapeVector((3, 2)))

    def test_exact_mode_cap(self, monkeypatch, random_2d):
        monkeypatch.setattr(settings, "EXACT_RATIONAL_MAX_POINTS", 10)
        with pytest.raises(CapExceededError):
            haar_coefficient_exact(random_2d, DyadicRectangle(ShapeVector((0, 0)), (0, 0)))

    def test_dimension_mismatch(self, random_2d):
        with pytest.raises(DimensionMismatchError):
            all_coefficients(random_2d, ShapeVector((1, 1, 1)))


class TestRFunction:
    def test_unit_interval_signs(self):
        f = RFunction.from_signs(ShapeVector((0,)), [1])
        assert eval_r_function(f, [0.75]) == 1
        assert eval_r_function(f, [0.25]) == -1

    def test_signs_round_trip_through_packing(self):
        shape = ShapeVector((2, 3))
        signs = np.random.default_rng(1).choice([-1, 1], size=shape.n_rectangles)
        f = RFunction.from_signs(shape, signs)
        np.testing.assert_array_equal(f.signs, signs)
        np.testing.assert_array_equal(f.sign_at(np.arange(shape.n_rectangles)), signs)

    def test_serialization(self):
        shape = ShapeVector((1, 2, 0))
        f = RFunction.from_signs(shape, [1, -1, -1, 1, 1, 1, -1, 1])
        assert RFunction.from_bytes(f.to_bytes()) == f

    def test_corrupt_payload(self):
        with pytest.raises(PointSetFormatError):
            RFunction.from_bytes(b"XXXX\x01\x00\x00\x00")
        f = RFunction.from_signs(ShapeVector((3,)), [1] * 8)
        with pytest.raises(PointSetFormatError):
            RFunction.from_bytes(f.to_bytes() + b"\x00")

    def test_rejects_invalid_signs(self):
        with pytest.raises(ValueError):
            RFunction.from_signs(ShapeVector((1,)), [1, 0])

    def test_values_are_signs_and_mean_zero(self):
        shape = ShapeVector((2, 3))
        f = RFunction.from_signs(shape, np.random.default_rng(2).choice([-1, 1], size=shape.n_rectangles))
        values = eval_r_function(f, midpoint_grid(16))
        assert set(np.unique(values)) <= {-1.0, 1.0}
        assert values.sum() == 0.0

    def test_different_shapes_are_orthogonal(self):
        rng = np.random.default_rng(3)
        f = RFunction.from_signs(ShapeVector((1, 2)), rng.choice([-1, 1], size=8))
        g = RFunction.from_signs(ShapeVector((2, 1)), rng.choice([-1, 1], size=8))
        grid = midpoint_grid(8)
        assert (eval_r_function(f, grid) * eval_r_function(g, grid)).sum() == 0.0
        assert gram_inner(f, g) == 0.0

    def test_gram_same_shape(self):
        shape = ShapeVector((1, 1))
        f = RFunction.from_signs(shape, [1, 1, -1, 1])
        g = RFunction.from_signs(shape, [1, -1, -1, 1])
        assert gram_inner(f, f) == 1.0
        assert gram_inner(f, g) == 0.5
        grid = midpoint_grid(4)
        assert (eval_r_function(f, grid) * eval_r_function(g, grid)).mean() == 0.5


class TestGreedy:
    def test_inner_product_is_sum_of_magnitudes(self, random_2d):
        shape = ShapeVector((2, 3))
        f = build_r_function_greedy(random_2d, shape)
        assert inner_product_exact(random_2d, f) == compensated_sum(np.abs(all_coefficients(random_2d, shape)))

    def test_flipping_a_sign_lowers_inner_product(self, random_2d):
        shape = ShapeVector((3, 3))
        f = build_r_function_greedy(random_2d, shape)
        coefficients = all_coefficients(random_2d, shape)
        signs = f.signs.copy()
        worst = int(np.argmax(np.abs(coefficients)))
        signs[worst] = -signs[worst]
        flipped = RFunction.from_signs(shape, signs)
        assert inner_product_exact(random_2d, flipped) < inner_product_exact(random_2d, f)

    def test_weighted_sum(self, random_2d):
        f = build_r_function_greedy(random_2d, ShapeVector((1, 1)))
        g = build_r_function_greedy(random_2d, ShapeVector((2, 0)))
        combined = inner_product_exact(random_2d, [(0.5, f), (0.0, g), (2.0, g)])
        expected = 0.5 * inner_product_exact(random_2d, f) + 2.0 * inner_product_exact(random_2d, g)
        assert combined == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("s", [4, 5, 6, 7])
    def test_hammersley_bounds(self, s):
        ps = generate_van_der_corput(2 ** s)
        for shape in shapes_of_order(2, roth_level(ps.n_points)):
            inner = inner_product_exact(ps, build_r_function_greedy(ps, shape))
            # 空矩形给出下界，帐篷函数的最大值给出上界
            assert 1 / 64 - 1e-12 <= inner <= 5 / 32 + 1e-12

    def test_matches_monte_carlo(self, hammersley_64):
        f = build_r_function_greedy(hammersley_64, ShapeVector((3, 4)))
        sample = sample_discrepancy(hammersley_64, 100_000, seed=5)
        products = sample.values * eval_r_function(f, sample.points)
        mean = products.mean()
        error = products.std(ddof=1) / np.sqrt(products.shape[0])
        assert abs(mean - inner_product_exact(hammersley_64, f)) <= 4 * error
