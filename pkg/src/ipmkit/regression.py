"""Ordinary least squares through the normal equations.

The fit forms ``X^T X beta = X^T y`` and solves it with Gaussian
elimination using scaled partial pivoting.  Columns are equilibrated to
unit norm before the product is formed and the solution gets one round of
iterative refinement.  Neither step changes the system being solved, but
together they keep raw-hour regressors (hundreds) and the log-complexity
regressor (below one) from swamping each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import SingularSystemError, ValidationError

PIVOT_TOLERANCE = 1e-10
CONDITION_WARNING_RATIO = 1e8
INTERPOLATION_TOLERANCE = 1e-8


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """``n x (k+1)`` regressor matrix whose first column is all ones."""

    values: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.values, dtype=float)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValidationError(f"design matrix must be 2-D and non-empty, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("design matrix contains NaN or infinite entries")
        if not np.all(a[:, 0] == 1.0):
            raise ValidationError("first design column must be the intercept (all ones)")
        a.setflags(write=False)
        object.__setattr__(self, "values", a)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        """Number of regressors, excluding the intercept."""
        return self.values.shape[1] - 1

    def __eq__(self, other: object) -> bool:
        return isinstance(other, DesignMatrix) and np.array_equal(self.values, other.values)


@dataclass(frozen=True)
class CoefficientVector:
    """``beta_0 .. beta_k`` for one stratum.  ``stratum`` is ``"custom"`` when untagged."""

    beta: tuple[float, ...]
    stratum: Any = "custom"

    def __post_init__(self) -> None:
        beta = tuple(float(b) for b in self.beta)
        if not beta:
            raise ValidationError("coefficient vector is empty")
        if not all(math.isfinite(b) for b in beta):
            raise ValidationError("coefficients must be finite")
        object.__setattr__(self, "beta", beta)

    @property
    def k(self) -> int:
        return len(self.beta) - 1

    @property
    def intercept(self) -> float:
        return self.beta[0]

    def __len__(self) -> int:
        return len(self.beta)

    def __getitem__(self, index: int) -> float:
        return self.beta[index]

    def __iter__(self):
        return iter(self.beta)

    def tagged(self, stratum: Any) -> "CoefficientVector":
        return CoefficientVector(self.beta, stratum)


@dataclass(frozen=True)
class SumsOfSquares:
    sxx: float
    syy: float
    sxy: float

    @property
    def correlation(self) -> float | None:
        if self.sxx == 0 or self.syy == 0:
            return None
        return self.sxy / math.sqrt(self.sxx * self.syy)


@dataclass(frozen=True)
class FitReport:
    coefficients: CoefficientVector
    residuals: tuple[float, ...]
    sum_squared_residuals: float
    r_squared: float | None
    exact_interpolation: bool
    condition_warning: bool
    pivot_ratio: float
    regressor_sums: tuple[SumsOfSquares, ...] = field(default=(), compare=False)

    @property
    def n(self) -> int:
        return len(self.residuals)

    @property
    def r_squared_defined(self) -> bool:
        return self.r_squared is not None

    @property
    def max_abs_residual(self) -> float:
        return max((abs(r) for r in self.residuals), default=0.0)


def build_design_matrix(feature_rows: Iterable[Sequence[float]]) -> DesignMatrix:
    rows = [tuple(float(v) for v in row) for row in feature_rows]
    if not rows:
        raise ValidationError("cannot build a design matrix from zero rows")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ValidationError(f"ragged feature rows: row 0 has {width} values, row {i} has {len(row)}")
    values = np.ones((len(rows), width + 1))
    if width:
        values[:, 1:] = np.array(rows)
    return DesignMatrix(values)


def _eliminate(a: np.ndarray, b: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Solve in place; return the solution and the pivots in elimination order."""
    n = len(b)
    scale = np.max(np.abs(a), axis=1)
    pivots = np.empty(n)
    for k in range(n):
        ratios = np.abs(a[k:, k]) / np.where(scale[k:] > 0, scale[k:], np.inf)
        p = int(np.argmax(ratios)) + k
        if scale[p] == 0 or abs(a[p, k]) <= tol * scale[p]:
            raise SingularSystemError("matrix is singular to working precision", pivot_index=k)
        if p != k:
            a[[k, p]] = a[[p, k]]
            b[[k, p]] = b[[p, k]]
            scale[[k, p]] = scale[[p, k]]
        pivots[k] = a[k, k]
        for i in range(k + 1, n):
            lam = a[i, k] / a[k, k]
            if lam != 0.0:
                a[i, k:] -= lam * a[k, k:]
                b[i] -= lam * b[k]
    x = np.empty(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x, pivots


def _pivot_ratio(pivots: np.ndarray) -> float:
    mags = np.abs(pivots)
    return float(mags.max() / mags.min())


def solve_linear_system(
    a: Sequence[Sequence[float]] | np.ndarray,
    b: Sequence[float] | np.ndarray,
    tol: float = PIVOT_TOLERANCE,
) -> np.ndarray:
    """Solve ``a @ x = b`` by Gaussian elimination with scaled partial pivoting.

    A pivot whose magnitude is at or below ``tol`` times the largest entry of
    its row raises :class:`SingularSystemError` carrying the elimination step.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"coefficient matrix must be square, got shape {a.shape}")
    if b.shape != (a.shape[0],):
        raise ValidationError(f"right-hand side has shape {b.shape}, expected ({a.shape[0]},)")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValidationError("linear system contains NaN or infinite entries")
    x, _ = _eliminate(a, b, tol)
    return x


def _centered_mean(values: np.ndarray) -> float:
    # shifting by the first element keeps constant inputs exactly constant
    shift = values[0]
    return shift + math.fsum(values - shift) / len(values)


def sums_of_squares(x: Sequence[float], y: Sequence[float]) -> SumsOfSquares:
    """Corrected sums of squares and cross products.

    Equal to ``sum(x^2) - sum(x)^2/n`` and friends, evaluated in the
    centred form so the results stay non-negative under rounding.
    """
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape:
        raise ValidationError(f"length mismatch: {xs.shape} vs {ys.shape}")
    if len(xs) == 0:
        raise ValidationError("sums of squares need at least one observation")
    dx = xs - _centered_mean(xs)
    dy = ys - _centered_mean(ys)
    return SumsOfSquares(
        sxx=math.fsum(dx * dx),
        syy=math.fsum(dy * dy),
        sxy=math.fsum(dx * dy),
    )


def _r_squared_from(residuals: np.ndarray, y: np.ndarray) -> float | None:
    if np.all(y == y[0]):
        return None
    syy = sums_of_squares(y, y).syy
    if syy == 0:
        return None
    return 1.0 - math.fsum(residuals * residuals) / syy


def r_squared(report: FitReport, y: Sequence[float]) -> float | None:
    """Coefficient of determination ``1 - SSres/Syy``; ``None`` when ``y`` is constant."""
    ys = np.asarray(y, dtype=float)
    if ys.shape != (report.n,):
        raise ValidationError(f"expected {report.n} targets, got {ys.shape}")
    return _r_squared_from(np.asarray(report.residuals), ys)


def fit_least_squares(
    x: DesignMatrix,
    y: Sequence[float],
    stratum: Any = "custom",
    tol: float = PIVOT_TOLERANCE,
) -> FitReport:
    ys = np.asarray(y, dtype=float)
    if ys.shape != (x.n,):
        raise ValidationError(f"design has {x.n} rows but {ys.size} targets were given")
    if not np.all(np.isfinite(ys)):
        raise ValidationError("targets contain NaN or infinite values")

    # canonical row order makes the result independent of observation order
    order = np.lexsort(np.column_stack([x.values, ys]).T[::-1])
    xv = x.values[order]
    ys = ys[order]
    norms = np.linalg.norm(xv, axis=0)
    norms[norms == 0] = 1.0
    xs = xv / norms
    gram = xs.T @ xs
    z, pivots = _eliminate(gram.copy(), xs.T @ ys, tol)

    # one refinement step against the unscaled residual
    resid = ys - xs @ z
    dz, _ = _eliminate(gram.copy(), xs.T @ resid, tol)
    z = z + dz

    beta = z / norms
    resid = ys - xv @ beta
    ratio = _pivot_ratio(pivots)
    scale = float(np.max(np.abs(ys)))
    exact = x.n == x.k + 1 and float(np.max(np.abs(resid))) <= INTERPOLATION_TOLERANCE * max(scale, 1e-300)
    residuals = np.empty_like(resid)
    residuals[order] = resid
    return FitReport(
        coefficients=CoefficientVector(tuple(beta), stratum),
        residuals=tuple(float(r) for r in residuals),
        sum_squared_residuals=math.fsum(resid * resid),
        r_squared=_r_squared_from(resid, ys),
        exact_interpolation=exact,
        condition_warning=ratio > CONDITION_WARNING_RATIO,
        pivot_ratio=ratio,
        regressor_sums=tuple(sums_of_squares(xv[:, j], ys) for j in range(1, xv.shape[1])),
    )
