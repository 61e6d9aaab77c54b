"""Command-line interface.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 I/O error.
Every non-zero exit prints exactly one ``ipmkit: error: ...`` line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .analysis import (
    DEFAULT_BAND,
    NegativePredictionWarning,
    Perturbation,
    compare_values,
    default_perturbations,
    predict,
    sensitivity_scan,
    tune_parameter,
)
from .calibration import CoefficientTable, Stratum, Target, calibrate_all, dumps_table, loads_table
from .dataio import (
    BUNDLED,
    DatasetDocument,
    bundled_text,
    parse_dataset,
)
from .domain import (
    FeatureVector,
    IpmMode,
    Phase,
    SizeClass,
    band_experience,
    classify_size,
    complexity_x5,
    derive_features,
    estimate_function_points,
    parameter_key,
    record_di,
    record_ipm,
)
from .errors import IpmError, NumericalError, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3
BUNDLED_PREFIX = "bundled:"
DISPLAY_DECIMALS = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# -- input helpers -----------------------------------------------------------

def _read_source(path: str) -> str:
    if path.startswith(BUNDLED_PREFIX):
        return bundled_text(path[len(BUNDLED_PREFIX):])
    return Path(path).read_text(encoding="utf-8")


def _load_dataset(path: str, strict: bool) -> DatasetDocument:
    doc = parse_dataset(_read_source(path), strict=strict)
    for w in doc.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return doc


def _load_coefficients(path: str) -> CoefficientTable:
    return loads_table(_read_source(path))


# -- output helpers ----------------------------------------------------------

def _cell(value: Any, fmt: str) -> str:
    if value is None:
        return "" if fmt == "csv" else "n/a"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        if fmt == "csv":
            return repr(value)
        if math.isnan(value):
            return "nan"
        return f"{value:.{DISPLAY_DECIMALS}f}"
    return str(value)


def render(columns: Sequence[str], rows: Sequence[Sequence[Any]], fmt: str) -> str:
    """Table text rounded for display, or CSV carrying full precision."""
    cells = [[_cell(v, fmt) for v in row] for row in rows]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(cells)
        return buf.getvalue()
    widths = [max([len(c)] + [len(r[i]) for r in cells]) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for r in cells:
        lines.append("  ".join(v.rjust(w) if _numeric(v) else v.ljust(w) for v, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _numeric(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


# -- commands ----------------------------------------------------------------

METRICS_COLUMNS = ("project_id", "phase", "size", "di", "ipm", "x5", "experience_band")


def metrics_rows(doc: DatasetDocument, mode: IpmMode) -> list[tuple]:
    rows = []
    for project, record in doc.phase_records:
        rows.append((
            project.id,
            record.phase.value,
            project.size.label,
            record_di(record),
            record_ipm(record, mode),
            complexity_x5(project.effective_function_points),
            band_experience(record.experience_years).value,
        ))
    return rows


def cmd_metrics(args: argparse.Namespace) -> int:
    doc = _load_dataset(args.dataset, args.strict)
    sys.stdout.write(render(METRICS_COLUMNS, metrics_rows(doc, args.mode), args.format))
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    doc = _load_dataset(args.dataset, args.strict)
    table = calibrate_all(
        doc.projects,
        mode=args.mode,
        target=args.target,
        dataset_id=args.dataset_id or Path(args.dataset).stem,
        fitted_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    counts: dict[Stratum, int] = {}
    for project in doc.projects:
        for phase in Phase:
            s = Stratum(phase, project.size)
            counts[s] = counts.get(s, 0) + 1
    rows = []
    for s in sorted(counts):
        if s in table.reports:
            r = table.reports[s]
            rows.append((s.phase.value, s.size.label, counts[s], "ok", r.exact_interpolation,
                         r.max_abs_residual, r.r_squared, r.condition_warning, ""))
        else:
            rows.append((s.phase.value, s.size.label, counts[s], "failed", None, None, None, None,
                         table.failures[s]))
    columns = ("phase", "size", "n", "status", "exact_interpolation", "max_abs_residual",
               "r_squared", "condition_warning", "error")
    sys.stdout.write(render(columns, rows, args.format))
    if args.out:
        Path(args.out).write_text(dumps_table(table), encoding="utf-8")
    if args.strict and table.failures:
        first = sorted(table.failures)[0]
        raise CommandError(
            f"{len(table.failures)} stratum fit(s) failed, first {first}: {table.failures[first]}",
            EXIT_NUMERICAL,
        )
    return EXIT_OK


VERIFY_COLUMNS = ("project_id", "phase", "size", "observed", "model", "deviation", "within_band")


def verify_rows(doc: DatasetDocument, table: CoefficientTable, mode: IpmMode, band: float):
    """Comparison rows plus skip diagnostics for records lacking coefficients."""
    rows, skipped = [], []
    width = table.target.feature_count
    for project, record in doc.phase_records:
        stratum = Stratum(record.phase, project.size)
        beta = table.coefficients.get(stratum)
        if beta is None:
            skipped.append(f"{project.id} {record.phase.value}: no coefficients for stratum {stratum}")
            continue
        if len(beta) != width + 1:
            raise ValidationError(f"stratum {stratum}: coefficient count does not match target {table.target.value}")
        observed = record_ipm(record, mode) if table.target is Target.IPM else record_di(record)
        model = predict(beta, derive_features(record, project).as_tuple()[:width])
        c = compare_values(observed, model, band)
        rows.append((project.id, record.phase.value, project.size.label, c.ipm_dc, c.ipm_tc,
                     c.relative_deviation, c.within_band))
    return rows, skipped


def cmd_verify(args: argparse.Namespace) -> int:
    doc = _load_dataset(args.dataset, args.strict)
    table = _load_coefficients(args.coefficients)
    rows, skipped = verify_rows(doc, table, args.mode, args.band)
    for s in skipped:
        print(f"skip: {s}", file=sys.stderr)
    sys.stdout.write(render(VERIFY_COLUMNS, rows, args.format))
    hits = sum(1 for r in rows if r[-1])
    summary = f"within {args.band:.0%} band: {hits} of {len(rows)} records ({len(skipped)} skipped)"
    print(summary if args.format == "table" else f"# {summary}", file=sys.stdout if args.format == "table" else sys.stderr)
    return EXIT_OK


def _baseline(args: argparse.Namespace, table: CoefficientTable):
    if table.target is not Target.IPM:
        raise ValidationError("what-if commands need an IPM coefficient table")
    if args.x5 is not None:
        x5 = args.x5
    elif args.fp is not None:
        x5 = complexity_x5(args.fp)
    elif args.hours is not None:
        x5 = complexity_x5(estimate_function_points(args.hours))
    else:
        raise ValidationError("give one of --x5, --fp or --hours for the complexity regressor")
    if args.size is not None:
        size = args.size
    elif args.hours is not None:
        size = classify_size(args.hours)
    else:
        raise ValidationError("give --size or --hours to select the coefficient stratum")
    stratum = Stratum(args.phase, size)
    beta = table.coefficients.get(stratum)
    if beta is None:
        raise ValidationError(f"coefficient table has no entry for stratum {stratum}")
    x = FeatureVector(args.x1, args.x2, args.x3, args.x4, x5)
    return beta, x, stratum


SENSITIVITY_COLUMNS = ("parameter", "baseline_value", "perturbed_value", "baseline_ipm",
                       "perturbed_ipm", "delta", "feasible", "note")


def cmd_sensitivity(args: argparse.Namespace) -> int:
    table = _load_coefficients(args.coefficients)
    beta, x, _ = _baseline(args, table)
    perturbations = default_perturbations(args.pct)
    for spec in args.set or ():
        name, sep, value = spec.partition("=")
        if not sep:
            raise ValidationError(f"--set expects PARAM=VALUE, got {spec!r}")
        try:
            perturbations.append(Perturbation(parameter_key(name), value=float(value)))
        except ValueError:
            raise ValidationError(f"--set value is not a number: {value!r}") from None
    rows = [
        (r.varied_parameter, r.baseline_value, r.perturbed_value, r.baseline_ipm, r.perturbed_ipm,
         r.delta, r.feasible, r.note)
        for r in sensitivity_scan(beta, x, perturbations)
    ]
    sys.stdout.write(render(SENSITIVITY_COLUMNS, rows, args.format))
    return EXIT_OK


def cmd_tune(args: argparse.Namespace) -> int:
    table = _load_coefficients(args.coefficients)
    beta, x, _ = _baseline(args, table)
    sol = tune_parameter(beta, x, args.target_ipm, args.free)
    rows = [(sol.free_parameter, sol.solved_value, sol.target_ipm, sol.achieved_ipm, sol.feasible,
             sol.feasibility_note)]
    for n, ipm in sol.integer_candidates:
        rows.append((f"{sol.free_parameter} (integer)", float(n), sol.target_ipm, ipm, n >= 1, ""))
    columns = ("parameter", "value", "target_ipm", "achieved_ipm", "feasible", "note")
    sys.stdout.write(render(columns, rows, args.format))
    return EXIT_OK


def cmd_datasets(args: argparse.Namespace) -> int:
    if args.export:
        if not args.out:
            raise ValidationError("--export needs --out")
        Path(args.out).write_text(bundled_text(args.export), encoding="utf-8")
        return EXIT_OK
    rows = []
    for name, filename in BUNDLED.items():
        if filename.endswith(".csv"):
            doc = parse_dataset(bundled_text(name))
            detail = f"{len(doc.projects)} projects, {len(doc.phase_records)} phase records"
        else:
            t = loads_table(bundled_text(name))
            detail = f"{len(t)} strata, target {t.target.value}"
        rows.append((f"{BUNDLED_PREFIX}{name}", filename, detail))
    sys.stdout.write(render(("name", "file", "contents"), rows, args.format))
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _fraction(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"not a finite number: {text}")
    return value


def _enum(parse):
    def convert(text: str):
        try:
            return parse(text)
        except ValidationError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return convert


def _global_options(suppress: bool) -> argparse.ArgumentParser:
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p = _Parser(add_help=False)
    p.add_argument("--format", choices=("table", "csv"), default=default("table"))
    p.add_argument("--strict", action="store_true", default=default(False),
                   help="reject unbalanced defect counts; fail calibrate on any singular stratum")
    p.add_argument("--mode", type=_enum(IpmMode.parse), default=default(IpmMode.TEAM_TIME),
                   help="IPM effort convention: teamtime (default) or eq2")
    return p


def _feature_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("coefficients", help="coefficient document (or bundled:reference)")
    p.add_argument("--phase", type=_enum(Phase.parse), required=True)
    p.add_argument("--size", type=_enum(SizeClass.parse))
    p.add_argument("--x1", "--inspection-time", dest="x1", type=float, required=True)
    p.add_argument("--x2", "--prep-time", dest="x2", type=float, required=True)
    p.add_argument("--x3", "--inspectors", dest="x3", type=float, required=True)
    p.add_argument("--x4", "--experience", dest="x4", type=float, required=True)
    p.add_argument("--x5", type=float, help="complexity in [0, 1]")
    p.add_argument("--fp", type=float, help="function points, sets x5")
    p.add_argument("--hours", type=float, help="project person-hours; sets size and, absent --fp, x5")


def build_parser() -> argparse.ArgumentParser:
    common = _global_options(suppress=True)
    parser = _Parser(
        prog="ipmkit",
        description="Inspection metrics, team-coefficient calibration and what-if analysis.",
        parents=[_global_options(suppress=False)],
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metrics", parents=[common], help="DI and IPM per project phase")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("calibrate", parents=[common], help="fit team coefficients per stratum")
    p.add_argument("dataset")
    p.add_argument("--target", type=_enum(Target.parse), default=Target.IPM)
    p.add_argument("--out", help="write the coefficient document here")
    p.add_argument("--dataset-id")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("verify", parents=[common], help="observed vs model values")
    p.add_argument("dataset")
    p.add_argument("coefficients")
    p.add_argument("--band", type=_fraction, default=DEFAULT_BAND)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sensitivity", parents=[common], help="one-at-a-time what-if scan")
    _feature_options(p)
    p.add_argument("--pct", type=_fraction, default=0.10, help="relative step, default 0.10")
    p.add_argument("--set", action="append", metavar="PARAM=VALUE", help="extra absolute override row")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("tune", parents=[common], help="solve one parameter for a target IPM")
    _feature_options(p)
    p.add_argument("--target", dest="target_ipm", type=float, required=True)
    p.add_argument("--free", type=parameter_key, required=True, help="x1..x5")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("datasets", parents=[common], help="list or export bundled data")
    p.add_argument("--export", choices=sorted(BUNDLED))
    p.add_argument("--out")
    p.set_defaults(func=cmd_datasets)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_VALIDATION
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NegativePredictionWarning)
            return args.func(args)
    except CommandError as exc:
        code, message = exc.code, str(exc)
    except NumericalError as exc:
        code, message = EXIT_NUMERICAL, str(exc)
    except IpmError as exc:
        code, message = EXIT_VALIDATION, str(exc)
    except OSError as exc:
        code, message = EXIT_IO, f"{exc.strerror or exc}: {exc.filename}" if exc.filename else str(exc)
    print(f"ipmkit: error: {' '.join(message.split())}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
