import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ipmkit.errors import SingularSystemError, ValidationError
from ipmkit.regression import (
    CoefficientVector,
    DesignMatrix,
    build_design_matrix,
    fit_least_squares,
    r_squared,
    solve_linear_system,
    sums_of_squares,
)

from synthetic import naive_r_squared, planted_dataset


class TestDesignMatrix:
    def test_intercept_prepended(self):
        x = build_design_matrix([(16.5, 1.5, 3, 3, 0.57526)])
        assert x.values.tolist() == [[1, 16.5, 1.5, 3, 3, 0.57526]]
        assert (x.n, x.k) == (1, 5)

    def test_duplicate_rows_accepted(self):
        x = build_design_matrix([(1, 2), (1, 2)])
        assert x.n == 2

    def test_empty(self):
        with pytest.raises(ValidationError):
            build_design_matrix([])

    def test_ragged(self):
        with pytest.raises(ValidationError, match="ragged"):
            build_design_matrix([(1, 2), (1, 2, 3)])

    def test_rejects_nan(self):
        with pytest.raises(ValidationError):
            build_design_matrix([(1, float("nan"))])

    def test_first_column_must_be_ones(self):
        with pytest.raises(ValidationError):
            DesignMatrix(np.array([[2.0, 1.0]]))

    def test_read_only(self):
        x = build_design_matrix([(1, 2)])
        with pytest.raises(ValueError):
            x.values[0, 0] = 5


class TestSolveLinearSystem:
    def test_identity(self):
        b = [3.0, -1.0, 2.5]
        assert solve_linear_system(np.eye(3), b).tolist() == b

    def test_diagonal(self):
        assert solve_linear_system([[2, 0], [0, 4]], [2, 8]).tolist() == [1, 2]

    def test_needs_pivoting(self):
        x = solve_linear_system([[0, 1], [1, 0]], [2, 3])
        assert x.tolist() == [3, 2]

    def test_round_trip_6x6(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a = rng.normal(size=(6, 6)) + 6 * np.eye(6)
            x_true = rng.uniform(-5, 5, 6)
            b = a @ x_true
            assert np.max(np.abs(solve_linear_system(a, b) - x_true)) <= 1e-9

    def test_singular_reports_pivot(self):
        with pytest.raises(SingularSystemError) as info:
            solve_linear_system([[1, 2, 3], [2, 4, 6], [1, 0, 1]], [1, 2, 3])
        assert info.value.pivot_index == 2

    def test_zero_matrix(self):
        with pytest.raises(SingularSystemError) as info:
            solve_linear_system(np.zeros((2, 2)), [0, 0])
        assert info.value.pivot_index == 0

    def test_inputs_untouched(self):
        a = np.array([[4.0, 1.0], [1.0, 3.0]])
        b = np.array([1.0, 2.0])
        solve_linear_system(a, b)
        assert a.tolist() == [[4, 1], [1, 3]] and b.tolist() == [1, 2]

    @pytest.mark.parametrize("a, b", [([[1, 2, 3], [4, 5, 6]], [1, 2]), ([[1, 0], [0, 1]], [1, 2, 3])])
    def test_shape_errors(self, a, b):
        with pytest.raises(ValidationError):
            solve_linear_system(a, b)


class TestSumsOfSquares:
    def test_constant(self):
        s = sums_of_squares([0.1] * 7, [0.1] * 7)
        assert (s.sxx, s.syy, s.sxy) == (0, 0, 0)

    def test_hand_values(self):
        s = sums_of_squares([1, 2, 3], [2, 4, 6])
        assert (s.sxx, s.syy, s.sxy) == pytest.approx((2, 8, 4), abs=1e-12)

    def test_negative_cross(self):
        assert sums_of_squares([1, 2], [2, 1]).sxy == pytest.approx(-0.5, abs=1e-15)

    def test_matches_textbook_formula(self):
        rng = np.random.default_rng(3)
        x, y = rng.normal(size=20), rng.normal(size=20)
        n = len(x)
        s = sums_of_squares(x, y)
        assert s.sxx == pytest.approx(np.sum(x**2) - np.sum(x) ** 2 / n, rel=1e-10)
        assert s.syy == pytest.approx(np.sum(y**2) - np.sum(y) ** 2 / n, rel=1e-10)
        assert s.sxy == pytest.approx(np.sum(x * y) - np.sum(x) * np.sum(y) / n, rel=1e-10)

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            sums_of_squares([1, 2], [1])

    @given(st.lists(st.tuples(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4)), min_size=1, max_size=40))
    def test_cauchy_schwarz(self, pairs):
        x, y = zip(*pairs)
        s = sums_of_squares(x, y)
        assert s.sxx >= 0 and s.syy >= 0
        assert s.sxy**2 <= s.sxx * s.syy * (1 + 1e-12) + 1e-300


class TestFit:
    def test_line_through_three_points(self):
        report = fit_least_squares(build_design_matrix([(0,), (1,), (2,)]), [2, 5, 8])
        assert report.coefficients.beta == pytest.approx((2, 3), abs=1e-12)
        assert report.max_abs_residual <= 1e-12
        assert report.r_squared == pytest.approx(1.0, abs=1e-12)
        assert not report.exact_interpolation  # n = 3, k + 1 = 2

    def test_square_system_interpolates(self):
        rng = np.random.default_rng(11)
        feats = rng.uniform(0, 10, (6, 5))
        y = rng.normal(size=6)
        report = fit_least_squares(build_design_matrix(feats), y)
        assert report.exact_interpolation
        assert report.max_abs_residual <= 1e-8 * np.max(np.abs(y))

    def test_planted_recovery(self):
        beta = np.array([0.5, -0.01, 0.02, 0.1, -0.05, 0.3])
        rng = np.random.default_rng(5)
        feats, _, _ = planted_dataset(rng)
        y = np.column_stack([np.ones(30), feats]) @ beta
        report = fit_least_squares(build_design_matrix(feats), y)
        assert np.max(np.abs(np.array(report.coefficients.beta) - beta)) <= 1e-8

    def test_residual_definition(self):
        rng = np.random.default_rng(2)
        feats, _, y = planted_dataset(rng, noise=1.0)
        x = build_design_matrix(feats)
        report = fit_least_squares(x, y)
        fitted = x.values @ np.array(report.coefficients.beta)
        assert np.allclose(report.residuals, y - fitted, atol=1e-12, rtol=0)
        assert report.sum_squared_residuals == pytest.approx(sum(r * r for r in report.residuals))
        assert 0 <= report.r_squared <= 1

    def test_duplicate_rows_are_singular(self):
        x = build_design_matrix([(1, 2)] * 5)
        with pytest.raises(SingularSystemError):
            fit_least_squares(x, [1, 2, 3, 4, 5])

    def test_constant_regressor_is_singular(self):
        x = build_design_matrix([(3, i, i * i) for i in range(6)])
        with pytest.raises(SingularSystemError):
            fit_least_squares(x, range(6))

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            fit_least_squares(build_design_matrix([(1,), (2,)]), [1, 2, 3])

    def test_stratum_tag(self):
        report = fit_least_squares(build_design_matrix([(0,), (1,)]), [1, 2], stratum="s")
        assert report.coefficients.stratum == "s"

    def test_condition_warning(self):
        eps = 1e-4
        x = build_design_matrix([(0, 0), (1, 1), (2, 2 + eps), (3, 3 - eps)])
        report = fit_least_squares(x, [0, 1, 2, 3])
        assert report.condition_warning
        assert not fit_least_squares(build_design_matrix([(0,), (1,), (2,)]), [0, 1, 3]).condition_warning

    def test_regressor_sums(self):
        report = fit_least_squares(build_design_matrix([(1,), (2,), (3,)]), [2, 4, 6])
        assert report.regressor_sums[0].sxy == pytest.approx(4)


class TestRSquared:
    def test_constant_target_undefined(self):
        report = fit_least_squares(build_design_matrix([(), (), ()]), [4.2, 4.2, 4.2])
        assert report.r_squared is None
        assert r_squared(report, [4.2, 4.2, 4.2]) is None

    def test_noiseless(self):
        rng = np.random.default_rng(8)
        feats, _, y = planted_dataset(rng)
        report = fit_least_squares(build_design_matrix(feats), y)
        assert r_squared(report, y) == pytest.approx(1.0, abs=1e-12)

    def test_matches_independent_formula(self):
        rng = np.random.default_rng(1234)
        feats, _, y = planted_dataset(rng, noise=5.0)
        x = build_design_matrix(feats)
        report = fit_least_squares(x, y)
        fitted = x.values @ np.array(report.coefficients.beta)
        assert r_squared(report, y) == pytest.approx(naive_r_squared(list(y), list(fitted)), abs=1e-12)

    def test_length_checked(self):
        report = fit_least_squares(build_design_matrix([(0,), (1,)]), [1, 2])
        with pytest.raises(ValidationError):
            r_squared(report, [1, 2, 3])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 10))
def test_residual_orthogonality(seed, noise):
    feats, _, y = planted_dataset(np.random.default_rng(seed), n=12, noise=noise)
    x = build_design_matrix(feats)
    report = fit_least_squares(x, y)
    normal = x.values.T @ np.array(report.residuals)
    assert np.max(np.abs(normal)) <= 1e-8 * np.max(np.abs(x.values.T @ y))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    feats, _, y = planted_dataset(rng, n=15, noise=2.0)
    order = rng.permutation(15)
    a = fit_least_squares(build_design_matrix(feats), y)
    b = fit_least_squares(build_design_matrix(feats[order]), y[order])
    assert np.max(np.abs(np.array(a.coefficients.beta) - b.coefficients.beta)) <= 1e-12
    assert np.max(np.abs(np.array(a.residuals)[order] - b.residuals)) <= 1e-12
    assert a.r_squared == b.r_squared


def test_coefficient_vector():
    v = CoefficientVector([1, 2, 3])
    assert v.k == 2 and v.intercept == 1 and list(v) == [1.0, 2.0, 3.0]
    with pytest.raises(ValidationError):
        CoefficientVector([1, float("inf")])
