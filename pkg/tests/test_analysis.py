import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ipmkit.analysis import (
    NegativePredictionWarning,
    Perturbation,
    compare,
    compare_values,
    default_perturbations,
    predict_ipm,
    sensitivity_scan,
    tune_parameter,
)
from ipmkit.calibration import Stratum, calibrate_all
from ipmkit.dataio import bundled_calibration_dataset, bundled_reference_coefficients
from ipmkit.domain import FeatureVector, IpmMode, Phase, SizeClass
from ipmkit.errors import NoLeverageError, ValidationError
from ipmkit.regression import CoefficientVector

X = FeatureVector(16.5, 1.5, 3, 3, 0.5752574989159953)


def _dot(beta, x):
    total = beta[0]
    for b, v in zip(beta[1:], x):
        total += b * v
    return total


class TestPredict:
    def test_intercept_only(self):
        assert predict_ipm((1, 0, 0, 0, 0, 0), X) == 1.0

    def test_single_regressor(self):
        assert predict_ipm((0, 1, 0, 0, 0, 0), X) == 16.5

    @pytest.mark.filterwarnings("ignore::ipmkit.analysis.NegativePredictionWarning")
    def test_matches_plain_dot_product(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            beta = rng.uniform(-10, 10, 6)
            x = FeatureVector.of(rng.uniform(0, 50, 5))
            assert predict_ipm(CoefficientVector(beta), x) == pytest.approx(_dot(beta, x), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            predict_ipm((1, 2, 3), X)

    def test_negative_warns_not_clamped(self):
        with pytest.warns(NegativePredictionWarning):
            assert predict_ipm((-2, 0, 0, 0, 0, 0), X) == -2


class TestCompare:
    def test_published_close_pair(self):
        c = compare_values(1.16, 1.1437)
        assert c.relative_deviation == pytest.approx(0.0141, abs=1e-4)
        assert c.within_band

    def test_published_divergent_pair(self):
        c = compare_values(0.3333, 0.0716)
        assert c.relative_deviation == pytest.approx(0.785, abs=1e-3)
        assert not c.within_band

    def test_equal(self):
        c = compare_values(0.5, 0.5, band=0.0)
        assert c.relative_deviation == 0 and c.within_band

    def test_zero_observed(self):
        c = compare_values(0.0, 0.2)
        assert not c.deviation_defined and not c.within_band

    def test_negative_band(self):
        with pytest.raises(ValidationError):
            compare_values(1, 1, band=-0.1)

    @given(st.floats(0.01, 10), st.floats(-10, 10), st.floats(0, 2), st.floats(0, 2))
    def test_band_monotone(self, dc, tc, a, b):
        lo, hi = sorted((a, b))
        if compare_values(dc, tc, lo).within_band:
            assert compare_values(dc, tc, hi).within_band

    @given(st.floats(0.01, 10), st.floats(-10, 10), st.floats(0, 2))
    def test_band_definition(self, dc, tc, band):
        c = compare_values(dc, tc, band)
        assert c.relative_deviation >= 0
        assert c.within_band == (c.relative_deviation <= band)

    def test_record_level(self):
        ds = bundled_calibration_dataset()
        table = calibrate_all(ds.projects)
        p = ds["M-P9"]
        rec = p.phase(Phase.DESIGN)
        c = compare(rec, p, table[Stratum(Phase.DESIGN, SizeClass.MEDIUM)], band=1e-6)
        assert c.ipm_dc == 22 / 180
        assert c.within_band

    def test_record_level_eq2(self):
        ds = bundled_calibration_dataset()
        p = ds["M-P9"]
        c = compare(p.phase(Phase.DESIGN), p, (0, 0, 0, 0, 0, 0), mode=IpmMode.EQ2)
        assert c.ipm_dc == 22 / 900


class TestSensitivity:
    def test_default_scan_shape(self):
        rows = sensitivity_scan((0.1, 0.01, 0.02, 0.03, 0.04, 0.05), X)
        assert len(rows) == 10
        assert [r.varied_parameter for r in rows[:2]] == ["x1", "x1"]
        assert all(r.feasible for r in rows)

    def test_linearity_with_published_medium_requirements(self):
        beta = bundled_reference_coefficients()[Stratum(Phase.REQUIREMENTS, SizeClass.MEDIUM)]
        x = FeatureVector(94, 10, 4, 4, 0.71)
        (row,) = sensitivity_scan(beta, x, [Perturbation("x1", fraction=0.10)])
        assert row.perturbed_value == pytest.approx(103.4)
        assert row.delta == pytest.approx(-19.7096 * 9.4, abs=1e-10)

    def test_zero_coefficient(self):
        (row,) = sensitivity_scan((1, 0, 2, 3, 4, 5), X, [Perturbation("x1", fraction=0.5)])
        assert row.delta == 0

    def test_inspector_floor(self):
        x = X.with_value("x3", 1)
        rows = sensitivity_scan((1, 1, 1, 1, 1, 1), x, [Perturbation("x3", fraction=-0.5), Perturbation("x1", fraction=0.1)])
        assert not rows[0].feasible and rows[0].delta is None and "x3" in rows[0].note
        assert rows[1].feasible

    def test_complexity_ceiling(self):
        (row,) = sensitivity_scan((1, 1, 1, 1, 1, 1), X, [Perturbation("x5", value=1.2)])
        assert not row.feasible

    def test_absolute_override(self):
        (row,) = sensitivity_scan((0, 0, 0, 2, 0, 0), X, [Perturbation("x3", value=4)])
        assert row.perturbed_value == 4 and row.delta == 2

    def test_zero_step(self):
        rows = sensitivity_scan((1, -2, 3, -4, 5, -6), X, default_perturbations(0.0))
        assert len(rows) == 5 and all(r.delta == 0 for r in rows)

    def test_perturbation_needs_one_kind(self):
        with pytest.raises(ValidationError):
            Perturbation("x1")
        with pytest.raises(ValidationError):
            Perturbation("x1", fraction=0.1, value=2)


class TestTune:
    def test_direct_inversion(self):
        sol = tune_parameter((0, 1, 0, 0, 0, 0), X, 0.5, "x1")
        assert sol.solved_value == 0.5 and sol.feasible

    def test_infeasible(self):
        sol = tune_parameter((0, 1, 0, 0, 0, 0), X, -3, "x1")
        assert not sol.feasible and "x1" in sol.feasibility_note
        assert sol.achieved_ipm == pytest.approx(-3)

    def test_no_leverage(self):
        with pytest.raises(NoLeverageError):
            tune_parameter((1, 0, 1, 1, 1, 1), X, 2, "x1")

    def test_inspector_integer_candidates(self):
        beta = (0.2, 0, 0, 0.1, 0, 0)
        sol = tune_parameter(beta, X, 0.55, "x3")
        assert sol.solved_value == pytest.approx(3.5)
        assert [n for n, _ in sol.integer_candidates] == [3, 4]
        assert [v for _, v in sol.integer_candidates] == pytest.approx([0.5, 0.6])

    def test_round_trip(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            beta = rng.uniform(-10, 10, 6)
            x = FeatureVector(*rng.uniform(1, 100, 2), float(rng.integers(1, 9)), rng.uniform(0, 10), rng.uniform(0, 1))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NegativePredictionWarning)
                target = predict_ipm(beta, x)
            for k in range(1, 6):
                sol = tune_parameter(beta, x, target, k)
                assert sol.solved_value == pytest.approx(x.get(k), abs=1e-10)
                assert sol.feasible


@settings(max_examples=200)
@given(
    st.lists(st.floats(-10, 10), min_size=6, max_size=6),
    st.integers(1, 5),
    st.floats(-5, 5),
)
def test_linearity_property(beta, k, h):
    x = FeatureVector(40, 8, 4, 5, 0.5)
    # x = (40, 8, 4, 5, 0.5) keeps every step inside the admissible domain
    value = x.get(k) + h * {3: 0.6, 5: 0.1}.get(k, 1)
    (row,) = sensitivity_scan(beta, x, [Perturbation(f"x{k}", value=value)])
    assert row.delta == pytest.approx(beta[k] * (value - x.get(k)), abs=1e-10)
