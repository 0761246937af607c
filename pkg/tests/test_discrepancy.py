"""D_N 求值、精确 L2、Monte-Carlo 范数与 Orlicz 范数"""

import math

import numpy as np
import pytest

from discrepancy_lab.discrepancy import (DominanceCounter, NormReport, OrliczSpec, check_interpolation,
                                         count_points_below, difference_sample, empirical_inequalities,
                                         eval_discrepancy, interpolation_check_values, l2_distance_exact,
                                         l2_norm_exact, lp_norm_from_sample, lp_norm_mc, luxemburg_norm,
                                         orlicz_norm_from_sample, orlicz_norm_mc, sample_discrepancy,
                                         sample_uniform)
from discrepancy_lab.exceptions import DimensionMismatchError
from discrepancy_lab.numerics import set_worker_count
from discrepancy_lab.pointset import (PointSet, corner_collapse, generate_faure_net, generate_random,
                                      generate_van_der_corput)

SIGMAS = 4.0


def brute_count(points: np.ndarray, queries: np.ndarray) -> np.ndarray:
    return np.all(points[None, :, :] < queries[:, None, :], axis=2).sum(axis=1)


class TestEvalDiscrepancy:
    def test_single_point(self):
        ps = PointSet(np.array([[0.5, 0.5]]))
        assert eval_discrepancy(ps, [0.75, 0.75]) == 0.4375

    def test_origin_is_zero(self, hammersley_64):
        assert eval_discrepancy(hammersley_64, [0.0, 0.0]) == 0.0

    def test_corner_point_never_counted(self):
        ps = PointSet(np.array([[1.0, 1.0]]))
        assert eval_discrepancy(ps, [0.3, 0.6]) == pytest.approx(-0.18)
        assert eval_discrepancy(ps, [1.0, 1.0]) == -1.0

    def test_batch_matches_brute_force(self, random_3d):
        queries = np.random.default_rng(0).random((300, 3))
        expected = brute_count(random_3d.points, queries) - 64 * np.prod(queries, axis=1)
        np.testing.assert_allclose(eval_discrepancy(random_3d, queries), expected, atol=1e-12)

    def test_dimension_mismatch(self, random_2d):
        with pytest.raises(DimensionMismatchError):
            eval_discrepancy(random_2d, [0.5, 0.5, 0.5])


class TestCounting:
    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_counter_matches_brute_force(self, dim):
        rng = np.random.default_rng(dim)
        points = rng.random((500, dim))
        queries = np.vstack([rng.random((400, dim)), points[:100]])  # 含与点坐标相等的查询
        np.testing.assert_array_equal(DominanceCounter(points).count(queries), brute_count(points, queries))

    def test_strict_inequality_on_ties(self):
        ps = PointSet(np.array([[0.5, 0.25]]))
        assert count_points_below(ps, [[0.5, 1.0], [0.75, 0.25], [0.75, 0.5]]).tolist() == [0, 0, 1]

    def test_additive_over_union(self, random_2d):
        other = generate_random(2, 30, seed=99)
        union = PointSet(np.vstack([random_2d.points, other.points]))
        queries = np.random.default_rng(1).random((200, 2))
        np.testing.assert_array_equal(count_points_below(union, queries),
                                      count_points_below(random_2d, queries) + count_points_below(other, queries))


class TestExactL2:
    def test_midpoint_in_one_dimension(self):
        report = l2_norm_exact(PointSet(np.array([[0.5]])))
        assert report.value ** 2 == pytest.approx(1 / 12, abs=1e-12)
        assert report.method == "exact"
        assert report.std_error == 0.0

    def test_origin_in_one_dimension(self):
        assert l2_norm_exact(PointSet(np.array([[0.0]]))).value ** 2 == pytest.approx(1 / 3, abs=1e-12)

    def test_dead_point(self):
        # D = -x1 x2，||x1 x2||_2 = 1/3
        assert l2_norm_exact(PointSet(np.array([[1.0, 1.0]]))).value == pytest.approx(1 / 3, abs=1e-12)

    def test_matches_monte_carlo(self, random_2d):
        exact = l2_norm_exact(random_2d).value
        mc = lp_norm_mc(random_2d, 2, samples=200_000, seed=3)
        assert abs(exact - mc.value) <= SIGMAS * mc.std_error

    @pytest.mark.slow
    @pytest.mark.parametrize("make_points", [
        lambda d, s: generate_random(d, 4 ** s, seed=s),
        lambda d, s: generate_van_der_corput(4 ** s) if d == 2 else None,
        lambda d, s: generate_faure_net(2, 2 * s, 2) if d == 2 else generate_faure_net(3, s + 1, 3),
    ], ids=["random", "hammersley", "faure"])
    @pytest.mark.parametrize("dim", [2, 3])
    @pytest.mark.parametrize("s", [3, 4, 5])
    def test_matches_monte_carlo_across_generators(self, make_points, dim, s):
        ps = make_points(dim, s)
        if ps is None:
            pytest.skip("Hammersley 只有二维")
        exact = l2_norm_exact(ps).value
        mc = lp_norm_mc(ps, 2, samples=1_000_000, seed=s)
        assert abs(exact - mc.value) <= SIGMAS * mc.std_error

    def test_thread_count_does_not_change_value(self):
        ps = generate_random(3, 3000, seed=5)
        set_worker_count(1)
        single = l2_norm_exact(ps).value
        set_worker_count(4)
        assert l2_norm_exact(ps).value == single

    def test_distance_to_self_is_zero(self, random_3d):
        assert l2_distance_exact(random_3d, random_3d).value == 0.0

    def test_distance_matches_monte_carlo(self):
        ps = generate_faure_net(2, 8, 2)
        collapsed = corner_collapse(ps, 0.25)
        exact = l2_distance_exact(ps, collapsed).value
        mc = lp_norm_from_sample(difference_sample(ps, collapsed, 100_000, seed=4), 2)
        assert exact > 0
        assert abs(exact - mc.value) <= SIGMAS * mc.std_error


class TestMonteCarlo:
    def test_one_dimensional_l2(self):
        report = lp_norm_mc(PointSet(np.array([[0.5]])), 2, samples=1_000_000, seed=1)
        assert abs(report.value - math.sqrt(1 / 12)) <= SIGMAS * report.std_error
        assert report.norm_kind == "L2"
        assert report.samples == 1_000_000

    def test_l1_of_corner_point(self):
        report = lp_norm_mc(PointSet(np.array([[1.0, 1.0]])), 1, samples=100_000, seed=2)
        assert abs(report.value - 0.25) <= SIGMAS * report.std_error
        assert report.norm_kind == "L1"

    def test_monotone_in_p(self, hammersley_64):
        sample = sample_discrepancy(hammersley_64, 20_000, seed=8)
        values = [lp_norm_from_sample(sample, p).value for p in (1, 1.5, 2, 3, 4)]
        for smaller, larger in zip(values, values[1:]):
            assert smaller <= larger * (1 + 1e-12)

    def test_sample_is_deterministic_across_threads(self, random_3d):
        set_worker_count(1)
        first = sample_discrepancy(random_3d, 50_000, seed=9)
        set_worker_count(4)
        second = sample_discrepancy(random_3d, 50_000, seed=9)
        np.testing.assert_array_equal(first.values, second.values)
        assert lp_norm_from_sample(first, 2) == lp_norm_from_sample(second, 2)

    def test_stratified_layout(self):
        points, n_cells, per_cell = sample_uniform(2, 1024, seed=1, stratify_level=3)
        assert (n_cells, per_cell) == (8, 128)
        # 形状 (2, 1)：第一坐标 4 格、第二坐标 2 格
        first = points[:128]
        assert np.all((first[:, 0] < 0.25) & (first[:, 1] < 0.5))

    def test_stratified_estimate(self, hammersley_64):
        sample = sample_discrepancy(hammersley_64, 4096, seed=6, stratified=True)
        assert sample.stratified
        assert sample.n_strata == 128
        report = lp_norm_from_sample(sample, 2)
        assert abs(report.value - l2_norm_exact(hammersley_64).value) <= SIGMAS * report.std_error

    def test_rejects_tiny_sample(self, hammersley_64):
        with pytest.raises(ValueError):
            sample_discrepancy(hammersley_64, 1, seed=0)

    def test_rejects_p_below_one(self, hammersley_64):
        sample = sample_discrepancy(hammersley_64, 100, seed=0)
        with pytest.raises(ValueError):
            lp_norm_from_sample(sample, 0.5)


class TestOrlicz:
    def test_llogl_zero_is_l1(self, random_2d):
        sample = sample_discrepancy(random_2d, 10_000, seed=1)
        assert orlicz_norm_from_sample(sample, OrliczSpec("LlogL", 0)).value == lp_norm_from_sample(sample, 1).value

    def test_monte_carlo_entry_point(self, hammersley_64):
        report = orlicz_norm_mc(hammersley_64, OrliczSpec("LlogL", 0), samples=5000, seed=2)
        assert report.value == lp_norm_mc(hammersley_64, 1, samples=5000, seed=2).value
        assert (report.norm_kind, report.method, report.samples, report.seed) == ("LlogL(0)", "bisection_mc", 5000, 2)
        llogl = orlicz_norm_mc(hammersley_64, OrliczSpec("LlogL", 1.0), samples=5000, seed=2)
        assert llogl.value >= report.value
        assert llogl.std_error > 0

    def test_constant_exp(self):
        value, error = luxemburg_norm(np.full(1000, 2.0), OrliczSpec("expL"))
        assert value == pytest.approx(2 / math.log(2), rel=1e-5)
        assert error == 0.0

    def test_constant_llogl(self):
        spec = OrliczSpec("LlogL", 1.0)
        value, _ = luxemburg_norm(np.full(500, 2.0), spec)
        assert float(spec.phi(np.float64(2.0 / value))) == pytest.approx(1.0, rel=1e-5)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
    def test_llogl_dominates_l1(self, hammersley_64, alpha):
        sample = sample_discrepancy(hammersley_64, 10_000, seed=2)
        assert (orlicz_norm_from_sample(sample, OrliczSpec("LlogL", alpha)).value
                >= lp_norm_from_sample(sample, 1).value)

    def test_zero_function(self):
        assert luxemburg_norm(np.zeros(10), OrliczSpec("expL")) == (0.0, 0.0)

    def test_report_metadata(self, hammersley_64):
        sample = sample_discrepancy(hammersley_64, 1000, seed=3)
        report = orlicz_norm_from_sample(sample, OrliczSpec("LlogL", 0.5))
        assert report.norm_kind == "LlogL(0.5)"
        assert report.method == "bisection_mc"
        assert report.seed == 3

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            OrliczSpec("Lfoo")
        with pytest.raises(ValueError):
            OrliczSpec("LlogL", -1.0)


class TestInequalities:
    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_interpolation_holds(self, random_2d, p):
        assert check_interpolation(random_2d, p, samples=10_000, seed=4).holds

    def test_constant_gives_equality(self):
        result = interpolation_check_values(np.full(100, 3.0), 2.0)
        assert result.lhs == pytest.approx(result.rhs, rel=1e-12)
        assert result.holds

    def test_empirical_inequalities(self, random_3d):
        checks = empirical_inequalities(sample_discrepancy(random_3d, 5000, seed=5), p=3.0)
        assert checks.all_hold
        assert checks.l1 <= checks.l2

    def test_rejects_p_one(self):
        with pytest.raises(ValueError):
            interpolation_check_values(np.ones(3), 1.0)


class TestNormReport:
    def test_validation(self):
        with pytest.raises(ValueError):
            NormReport("L2", -1.0, "exact")
        with pytest.raises(ValueError):
            NormReport("L2", 1.0, "exact", std_error=0.1)
        with pytest.raises(ValueError):
            NormReport("L2", 1.0, "guess")

    def test_to_dict(self):
        data = NormReport("L1", 0.5, "monte_carlo", 0.01, 100, 7).to_dict()
        assert data == {"norm_kind": "L1", "value": 0.5, "method": "monte_carlo", "std_error": 0.01,
                        "samples": 100, "seed": 7}

    def test_zero_variance_sample_keeps_its_method(self, random_2d):
        sample = difference_sample(random_2d, random_2d, 500, seed=1)
        report = lp_norm_from_sample(sample, 1.0)
        assert (report.value, report.method, report.std_error) == (0.0, "monte_carlo", 0.0)
        assert report.samples == 500
