"""Stratified team-coefficient fitting and the coefficient document format."""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .domain import (
    IpmMode,
    Phase,
    ProjectRecord,
    SizeClass,
    derive_features,
    record_di,
    record_ipm,
)
from .errors import EmptyStratumError, IpmError, ParseError, UnderdeterminedError, ValidationError
from .regression import CoefficientVector, FitReport, build_design_matrix, fit_least_squares

DOCUMENT_FORMAT = "ipmkit-coefficients/1"
RAW_FEATURES = "raw"


class Target(enum.Enum):
    IPM = "ipm"
    DI = "di"

    @property
    def feature_count(self) -> int:
        # the DI model has no complexity term
        return 5 if self is Target.IPM else 4

    @classmethod
    def parse(cls, text: str) -> "Target":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValidationError(f"unknown fit target {text!r}") from None


@dataclass(frozen=True, order=True)
class Stratum:
    phase: Phase = field(compare=False)
    size: SizeClass = field(compare=False)
    _key: tuple[int, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_key", (list(Phase).index(self.phase), int(self.size)))

    def __str__(self) -> str:
        return f"{self.phase.value}/{self.size.label}"

    @classmethod
    def all(cls) -> list["Stratum"]:
        return [cls(p, s) for p in Phase for s in SizeClass]


@dataclass
class CoefficientTable:
    """Coefficient vectors keyed by stratum, plus per-stratum fit failures.

    ``reports`` holds fit diagnostics from the run that produced the table.
    They are not serialised and take no part in equality.
    """

    coefficients: dict[Stratum, CoefficientVector] = field(default_factory=dict)
    failures: dict[Stratum, str] = field(default_factory=dict)
    dataset_id: str = ""
    mode: IpmMode = IpmMode.TEAM_TIME
    target: Target = Target.IPM
    feature_convention: str = RAW_FEATURES
    fitted_at: str | None = None
    reports: dict[Stratum, FitReport] = field(default_factory=dict, compare=False, repr=False)

    def __getitem__(self, stratum: Stratum) -> CoefficientVector:
        return self.coefficients[stratum]

    def __contains__(self, stratum: object) -> bool:
        return stratum in self.coefficients

    def __len__(self) -> int:
        return len(self.coefficients)

    def get(self, phase: Phase, size: SizeClass) -> CoefficientVector | None:
        return self.coefficients.get(Stratum(phase, size))


def _observations(projects: Iterable[ProjectRecord], stratum: Stratum):
    return [
        (project, project.phase(stratum.phase))
        for project in projects
        if project.size is stratum.size
    ]


def calibrate_stratum(
    projects: Sequence[ProjectRecord],
    stratum: Stratum,
    mode: IpmMode = IpmMode.TEAM_TIME,
    target: Target = Target.IPM,
) -> FitReport:
    obs = _observations(projects, stratum)
    if not obs:
        raise EmptyStratumError(f"no projects fall into stratum {stratum}")
    width = target.feature_count
    if len(obs) < width + 1:
        raise UnderdeterminedError(
            f"stratum {stratum}: {len(obs)} observations cannot determine {width + 1} coefficients"
        )
    rows = [derive_features(rec, proj).as_tuple()[:width] for proj, rec in obs]
    if target is Target.IPM:
        y = [record_ipm(rec, mode) for _, rec in obs]
    else:
        y = [record_di(rec) for _, rec in obs]
    return fit_least_squares(build_design_matrix(rows), y, stratum=stratum)


def calibrate_all(
    projects: Sequence[ProjectRecord],
    mode: IpmMode = IpmMode.TEAM_TIME,
    target: Target = Target.IPM,
    dataset_id: str = "",
    fitted_at: str | None = None,
) -> CoefficientTable:
    """Fit every populated stratum.  A failing stratum is recorded, not raised."""
    if not projects:
        raise ValidationError("cannot calibrate an empty dataset")
    table = CoefficientTable(
        dataset_id=dataset_id, mode=mode, target=target, fitted_at=fitted_at
    )
    for stratum in Stratum.all():
        if not _observations(projects, stratum):
            continue
        try:
            report = calibrate_stratum(projects, stratum, mode, target)
        except IpmError as exc:
            table.failures[stratum] = str(exc)
            continue
        table.coefficients[stratum] = report.coefficients
        table.reports[stratum] = report
    return table


def table_to_document(table: CoefficientTable) -> dict:
    return {
        "format": DOCUMENT_FORMAT,
        "dataset_id": table.dataset_id,
        "target": table.target.value,
        "mode": table.mode.value,
        "feature_convention": table.feature_convention,
        "fitted_at": table.fitted_at,
        "strata": [
            {
                "phase": s.phase.value,
                "size": s.size.label,
                # json writes floats with repr(), which round-trips exactly
                "beta": list(table.coefficients[s].beta),
            }
            for s in sorted(table.coefficients)
        ],
        "failures": [
            {"phase": s.phase.value, "size": s.size.label, "error": table.failures[s]}
            for s in sorted(table.failures)
        ],
    }


def dumps_table(table: CoefficientTable) -> str:
    return json.dumps(table_to_document(table), indent=2) + "\n"


def save_table(table: CoefficientTable, destination: str | os.PathLike) -> Path:
    path = Path(destination)
    path.write_text(dumps_table(table), encoding="utf-8")
    return path


def _require(obj: dict, key: str, where: str, line: int | None = None):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"missing field in {where}", field=key, line=line)
    return obj[key]


def _stratum_from(entry: dict, where: str) -> Stratum:
    try:
        return Stratum(
            Phase.parse(str(_require(entry, "phase", where))),
            SizeClass.parse(str(_require(entry, "size", where))),
        )
    except ParseError:
        raise
    except ValidationError as exc:
        raise ParseError(f"{where}: {exc}") from None


def loads_table(text: str) -> CoefficientTable:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed coefficient document: {exc.msg}", line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError("coefficient document must be a JSON object")
    fmt = _require(doc, "format", "document")
    if fmt != DOCUMENT_FORMAT:
        raise ParseError(f"unsupported document format {fmt!r}", field="format")
    try:
        mode = IpmMode.parse(str(_require(doc, "mode", "document")))
        target = Target.parse(str(_require(doc, "target", "document")))
    except ParseError:
        raise
    except ValidationError as exc:
        raise ParseError(str(exc)) from None
    table = CoefficientTable(
        dataset_id=str(_require(doc, "dataset_id", "document")),
        mode=mode,
        target=target,
        feature_convention=str(doc.get("feature_convention", RAW_FEATURES)),
        fitted_at=doc.get("fitted_at"),
    )
    strata = _require(doc, "strata", "document")
    if not isinstance(strata, list):
        raise ParseError("strata must be a list", field="strata")
    for i, entry in enumerate(strata):
        where = f"strata[{i}]"
        stratum = _stratum_from(entry, where)
        beta = _require(entry, "beta", where)
        if not isinstance(beta, list) or not all(
            isinstance(b, (int, float)) and not isinstance(b, bool) for b in beta
        ):
            raise ParseError(f"{where}: beta must be a list of numbers", field="beta")
        if len(beta) != target.feature_count + 1:
            raise ParseError(
                f"{where}: expected {target.feature_count + 1} coefficients for target "
                f"{target.value}, got {len(beta)}",
                field="beta",
            )
        if stratum in table.coefficients:
            raise ParseError(f"{where}: duplicate stratum {stratum}", field="phase")
        try:
            table.coefficients[stratum] = CoefficientVector(tuple(beta), stratum)
        except ValidationError as exc:
            raise ParseError(f"{where}: {exc}", field="beta") from None
    for i, entry in enumerate(doc.get("failures", [])):
        where = f"failures[{i}]"
        table.failures[_stratum_from(entry, where)] = str(_require(entry, "error", where))
    return table


def load_table(source: str | os.PathLike) -> CoefficientTable:
    return loads_table(Path(source).read_text(encoding="utf-8"))
