"""Prediction, observed-vs-model comparison, what-if scans and inverse tuning."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

from .domain import (
    PARAMETERS,
    FeatureVector,
    IpmMode,
    PhaseRecord,
    ProjectRecord,
    admissible_range_text,
    derive_features,
    parameter_admissible,
    parameter_key,
    record_ipm,
)
from .errors import NoLeverageError, ValidationError
from .regression import CoefficientVector

DEFAULT_BAND = 0.10
DEFAULT_STEP = 0.10
LEVERAGE_TOLERANCE = 1e-12
# a solved value this close outside a bound is rounding, not infeasibility
TUNING_SLACK = 1e-9


class NegativePredictionWarning(UserWarning):
    """The linear model produced a negative IPM; it is reported unclamped."""


def _beta_of(beta: CoefficientVector | Sequence[float]) -> tuple[float, ...]:
    return tuple(beta.beta) if isinstance(beta, CoefficientVector) else tuple(float(b) for b in beta)


def predict(beta: CoefficientVector | Sequence[float], x: Iterable[float]) -> float:
    """``beta_0 + sum(beta_j * x_j)`` for any regressor count."""
    b = _beta_of(beta)
    xs = tuple(float(v) for v in x)
    if len(b) != len(xs) + 1:
        raise ValidationError(f"{len(b)} coefficients do not fit {len(xs)} regressors")
    return math.fsum([b[0], *(bj * xj for bj, xj in zip(b[1:], xs))])


def predict_ipm(beta: CoefficientVector | Sequence[float], x: FeatureVector | Sequence[float]) -> float:
    b = _beta_of(beta)
    if len(b) != 6:
        raise ValidationError(f"IPM model needs 6 coefficients, got {len(b)}")
    value = predict(b, x)
    if value < 0:
        warnings.warn(f"predicted IPM is negative ({value:.4f})", NegativePredictionWarning, stacklevel=2)
    return value


@dataclass(frozen=True)
class Comparison:
    ipm_dc: float
    ipm_tc: float
    relative_deviation: float | None
    within_band: bool
    band: float = DEFAULT_BAND

    @property
    def deviation_defined(self) -> bool:
        return self.relative_deviation is not None

    @property
    def negative_prediction(self) -> bool:
        return self.ipm_tc < 0


def compare_values(ipm_dc: float, ipm_tc: float, band: float = DEFAULT_BAND) -> Comparison:
    """Relative deviation of the model value from the observed one.

    The observed value is the denominator.  When it is zero the deviation
    is undefined and the pair is never within band.
    """
    if band < 0 or not math.isfinite(band):
        raise ValidationError(f"band must be a non-negative fraction, got {band}")
    if ipm_dc == 0:
        return Comparison(ipm_dc, ipm_tc, None, False, band)
    deviation = abs(ipm_dc - ipm_tc) / abs(ipm_dc)
    return Comparison(ipm_dc, ipm_tc, deviation, deviation <= band, band)


def compare(
    record: PhaseRecord,
    project: ProjectRecord,
    beta: CoefficientVector | Sequence[float],
    mode: IpmMode = IpmMode.TEAM_TIME,
    band: float = DEFAULT_BAND,
) -> Comparison:
    observed = record_ipm(record, mode)
    with warnings.catch_warnings():
        # Comparison.negative_prediction carries the flag instead
        warnings.simplefilter("ignore", NegativePredictionWarning)
        modelled = predict_ipm(beta, derive_features(record, project))
    return compare_values(observed, modelled, band)


@dataclass(frozen=True)
class Perturbation:
    """Change one regressor, either by a fraction of its value or to an absolute value."""

    parameter: str
    fraction: float | None = None
    value: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "parameter", parameter_key(self.parameter))
        if (self.fraction is None) == (self.value is None):
            raise ValidationError("give exactly one of fraction or value")

    def apply(self, baseline: float) -> float:
        if self.value is not None:
            return float(self.value)
        return baseline * (1.0 + self.fraction)

    @property
    def label(self) -> str:
        if self.value is not None:
            return f"{self.parameter}={self.value:g}"
        return f"{self.parameter}{self.fraction:+.0%}"


@dataclass(frozen=True)
class SensitivityRow:
    varied_parameter: str
    baseline_value: float
    perturbed_value: float
    baseline_ipm: float
    perturbed_ipm: float | None
    delta: float | None
    feasible: bool = True
    note: str = ""


def default_perturbations(step: float = DEFAULT_STEP) -> list[Perturbation]:
    out = []
    for p in PARAMETERS:
        out.append(Perturbation(p, fraction=step))
        if step != 0:
            out.append(Perturbation(p, fraction=-step))
    return out


def sensitivity_scan(
    beta: CoefficientVector | Sequence[float],
    x: FeatureVector,
    perturbations: Iterable[Perturbation] | None = None,
) -> list[SensitivityRow]:
    """One-at-a-time what-if rows.  Defaults to +/-10% on each regressor.

    A perturbation that leaves a regressor's admissible range yields an
    infeasible row with no IPM; the scan carries on.
    """
    b = _beta_of(beta)
    if len(b) != 6:
        raise ValidationError(f"IPM model needs 6 coefficients, got {len(b)}")
    baseline = predict(b, x)
    rows = []
    for pert in default_perturbations() if perturbations is None else perturbations:
        before = x.get(pert.parameter)
        after = pert.apply(before)
        if not parameter_admissible(pert.parameter, after):
            rows.append(SensitivityRow(
                pert.parameter, before, after, baseline, None, None, False,
                f"{pert.parameter} must be {admissible_range_text(pert.parameter)}",
            ))
            continue
        moved = predict(b, x.with_value(pert.parameter, after))
        rows.append(SensitivityRow(
            pert.parameter, before, after, baseline, moved, moved - baseline,
            note="negative IPM" if moved < 0 else "",
        ))
    return rows


@dataclass(frozen=True)
class TuningSolution:
    free_parameter: str
    solved_value: float
    feasible: bool
    feasibility_note: str
    target_ipm: float
    achieved_ipm: float
    # integer inspector counts bracketing a continuous x3 solution, with their IPM
    integer_candidates: tuple[tuple[int, float], ...] = ()


def tune_parameter(
    beta: CoefficientVector | Sequence[float],
    x: FeatureVector,
    target_ipm: float,
    free: str | int,
) -> TuningSolution:
    """Solve the linear model for the one regressor that hits ``target_ipm``."""
    b = _beta_of(beta)
    if len(b) != 6:
        raise ValidationError(f"IPM model needs 6 coefficients, got {len(b)}")
    key = parameter_key(free)
    j = PARAMETERS.index(key) + 1
    if abs(b[j]) <= LEVERAGE_TOLERANCE:
        raise NoLeverageError(f"parameter {key} does not influence IPM under these coefficients")
    values = x.as_tuple()
    rest = math.fsum([b[0], *(b[i + 1] * values[i] for i in range(5) if i + 1 != j)])
    solved = (target_ipm - rest) / b[j]
    feasible = parameter_admissible(key, solved, slack=TUNING_SLACK)
    note = "" if feasible else f"solution {solved:.6g} violates {key} {admissible_range_text(key)}"

    candidates: tuple[tuple[int, float], ...] = ()
    if key == "x3" and math.isfinite(solved):
        ints = sorted({math.floor(solved), math.ceil(solved)})
        candidates = tuple(
            (n, predict(b, x.with_value("x3", float(n)))) for n in ints if n >= 1
        )
        if not candidates and not feasible:
            note += "; no integer inspector count >= 1 brackets it"
    achieved = predict(b, x.with_value(key, solved)) if math.isfinite(solved) else math.nan
    return TuningSolution(key, solved, feasible, note, target_ipm, achieved, candidates)
