"""Dataset files: one CSV row per (project, phase).

Leading ``# key: value`` comment lines carry the format version and a
free-text provenance note.  The header row is mandatory.  Comma and tab
delimiters are both accepted; decimals use a dot.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .calibration import CoefficientTable, loads_table
from .domain import Phase, PhaseRecord, ProjectRecord
from .errors import ParseError, ValidationError

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
COLUMNS = (
    "project_id",
    "total_hours",
    "function_points",
    "phase",
    "total_defects",
    "defects_inspection",
    "defects_testing",
    "inspection_time",
    "prep_time",
    "inspectors",
    "experience_years",
)
_INT_COLUMNS = {"total_defects", "defects_inspection", "defects_testing", "inspectors"}
# column name -> PhaseRecord attribute, for diagnostics
_RECORD_FIELD = {
    "total_defects": "total_defects",
    "defects_inspection": "defects_inspection",
    "defects_testing": "defects_testing",
    "inspection_time": "inspection_time",
    "prep_time": "preparation_time",
    "inspectors": "inspector_count",
    "experience_years": "experience_years",
}
_COLUMN_FOR = {v: k for k, v in _RECORD_FIELD.items()}

BUNDLED = {
    "calibration": "calibration.csv",
    "verification": "verification.csv",
    "reference": "reference_coefficients.json",
}


@dataclass(frozen=True)
class DatasetDocument:
    projects: tuple[ProjectRecord, ...]
    provenance: str = ""
    version: int = FORMAT_VERSION
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        ids = [p.id for p in self.projects]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise ValidationError(f"duplicate project ids: {', '.join(dupes)}")

    def __len__(self) -> int:
        return len(self.projects)

    def __getitem__(self, project_id: str) -> ProjectRecord:
        for p in self.projects:
            if p.id == project_id:
                return p
        raise KeyError(project_id)

    @property
    def phase_records(self) -> list[tuple[ProjectRecord, PhaseRecord]]:
        return [(p, r) for p in self.projects for r in p.phases]


def _number(text: str, column: str, line: int):
    raw = text.strip()
    try:
        if column in _INT_COLUMNS or column == "function_points":
            value = float(raw)
            if not value.is_integer():
                raise ValueError
            return int(value)
        return float(raw)
    except ValueError:
        raise ParseError(f"not a valid {'integer' if column in _INT_COLUMNS else 'number'}: {raw!r}",
                         line=line, field=column) from None


def parse_dataset(source: str, strict: bool = False) -> DatasetDocument:
    """Parse and validate dataset text.

    A row whose inspection and testing defects do not add up to the total
    is logged as a warning, or rejected when ``strict`` is set.  Other
    invariant breaches are always rejected.
    """
    meta: dict[str, str] = {}
    lines = source.splitlines()
    body_start = 0
    for i, text in enumerate(lines):
        stripped = text.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            key, sep, value = stripped.lstrip("#").partition(":")
            if sep:
                meta[key.strip().lower()] = value.strip()
            continue
        body_start = i
        break
    else:
        raise ParseError("no records")

    header_line = lines[body_start]
    delimiter = "\t" if "\t" in header_line else ","
    reader = csv.reader(lines[body_start:], delimiter=delimiter)
    header = [h.strip().lower() for h in next(reader)]
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise ParseError(f"header lacks required column(s) {', '.join(missing)}",
                         line=body_start + 1, field=missing[0])
    index = {name: header.index(name) for name in COLUMNS}

    try:
        version = int(meta.get("format", FORMAT_VERSION))
    except ValueError:
        raise ParseError(f"bad format version {meta['format']!r}", field="format") from None
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported format version {version}", field="format")

    projects: dict[str, dict] = {}
    warnings: list[str] = []
    for offset, row in enumerate(reader, start=1):
        line = body_start + 1 + offset
        if not row or all(not c.strip() for c in row) or row[0].lstrip().startswith("#"):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} columns, found {len(row)}", line=line)
        cell = {name: row[i].strip() for name, i in index.items()}
        pid = cell["project_id"]
        if not pid:
            raise ParseError("empty project id", line=line, field="project_id")
        try:
            phase = Phase.parse(cell["phase"])
        except ValidationError:
            raise ParseError(f"unknown phase {cell['phase']!r}", line=line, field="phase") from None
        hours = _number(cell["total_hours"], "total_hours", line)
        fp = _number(cell["function_points"], "function_points", line) if cell["function_points"] else None
        values = {_RECORD_FIELD[c]: _number(cell[c], c, line) for c in _RECORD_FIELD}
        record = PhaseRecord(phase=phase, **values)

        where = f"project {pid}, phase {phase.value}"
        problems = record.problems()
        if problems:
            fname, message = problems[0]
            raise ParseError(f"{where}: {fname} {message}", line=line, field=_COLUMN_FOR[fname])
        if not record.defects_balance:
            msg = (f"{where}: defects_inspection + defects_testing = "
                   f"{record.defects_inspection + record.defects_testing} != total_defects {record.total_defects}")
            if strict:
                raise ValidationError(msg)
            log.warning(msg)
            warnings.append(msg)

        entry = projects.setdefault(pid, {"hours": hours, "fp": fp, "phases": {}, "line": line})
        if entry["hours"] != hours or entry["fp"] != fp:
            raise ParseError(f"project {pid}: project-level fields differ from line {entry['line']}",
                             line=line, field="total_hours" if entry["hours"] != hours else "function_points")
        if phase in entry["phases"]:
            raise ParseError(f"{where}: duplicate phase row", line=line, field="phase")
        entry["phases"][phase] = record

    if not projects:
        raise ParseError("no records")
    built = []
    for pid, entry in projects.items():
        absent = [p.value for p in Phase if p not in entry["phases"]]
        if absent:
            raise ParseError(f"project {pid}: missing phase row(s) {', '.join(absent)}", field="phase")
        try:
            built.append(ProjectRecord(
                id=pid,
                total_hours=entry["hours"],
                function_points=entry["fp"],
                phases=tuple(entry["phases"][p] for p in Phase),
            ))
        except ValidationError as exc:
            raise ParseError(str(exc), line=entry["line"], field="total_hours") from None
    return DatasetDocument(
        projects=tuple(built),
        provenance=meta.get("provenance", ""),
        version=version,
        warnings=tuple(warnings),
    )


def load_dataset(path: str | os.PathLike, strict: bool = False) -> DatasetDocument:
    return parse_dataset(Path(path).read_text(encoding="utf-8"), strict=strict)


def _fmt(value: float | int | None) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def serialize_dataset(doc: DatasetDocument, delimiter: str = ",") -> str:
    buf = io.StringIO()
    buf.write(f"# format: {doc.version}\n")
    if doc.provenance:
        buf.write(f"# provenance: {' '.join(doc.provenance.split())}\n")
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(COLUMNS)
    for project in doc.projects:
        for r in project.phases:
            writer.writerow([
                project.id,
                _fmt(project.total_hours),
                _fmt(project.function_points),
                r.phase.value,
                r.total_defects,
                r.defects_inspection,
                r.defects_testing,
                _fmt(r.inspection_time),
                _fmt(r.preparation_time),
                r.inspector_count,
                _fmt(r.experience_years),
            ])
    return buf.getvalue()


def _bundled_text(name: str) -> str:
    return resources.files("ipmkit.data").joinpath(BUNDLED[name]).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def bundled_calibration_dataset() -> DatasetDocument:
    """The eighteen small, medium and large calibration projects."""
    return parse_dataset(_bundled_text("calibration"), strict=True)


@lru_cache(maxsize=None)
def bundled_verification_dataset() -> DatasetDocument:
    return parse_dataset(_bundled_text("verification"), strict=True)


def bundled_reference_coefficients() -> CoefficientTable:
    """Published team coefficients, for prediction and what-if use only.

    They were fitted under an undocumented regressor scaling, so applying
    them to raw-unit features gives values unrelated to the observed IPM.
    """
    # fresh copy each call; CoefficientTable is mutable
    return loads_table(_bundled_text("reference"))


def bundled_text(name: str) -> str:
    if name not in BUNDLED:
        raise ValidationError(f"unknown bundled dataset {name!r}; choose from {', '.join(BUNDLED)}")
    return _bundled_text(name)
