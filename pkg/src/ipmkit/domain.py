"""Inspection records and the closed-form metrics computed from them.

Depth of inspection (DI) is the share of all defects found by inspection.
The inspection performance metric (IPM) is inspection defects per unit of
inspection effort.  Two effort conventions exist, see :class:`IpmMode`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields
from typing import Iterator, Sequence

from .errors import DomainError, ValidationError

HOURS_PER_FUNCTION_POINT = 5.0
SMALL_LIMIT_HOURS = 1000.0
MEDIUM_LIMIT_HOURS = 5000.0
NOVICE_LIMIT_YEARS = 2.0
AVERAGE_LIMIT_YEARS = 4.0


class Phase(enum.Enum):
    REQUIREMENTS = "requirements"
    DESIGN = "design"
    IMPLEMENTATION = "implementation"

    @classmethod
    def parse(cls, text: str) -> "Phase":
        key = text.strip().lower()
        for phase in cls:
            if phase.value == key or phase.value.startswith(key) and len(key) >= 3:
                return phase
        raise ValidationError(f"unknown phase {text!r}")


@enum.unique
class SizeClass(enum.IntEnum):
    """Project size by development effort.  Ordered Small < Medium < Large."""

    SMALL = 1
    MEDIUM = 2
    LARGE = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "SizeClass":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValidationError(f"unknown size class {text!r}") from None


class ExperienceBand(enum.Enum):
    NOVICE = "novice"
    AVERAGE = "average"
    EXPERIENCED = "experienced"


class IpmMode(enum.Enum):
    """Effort convention for IPM.

    ``EQ2`` divides by inspectors times hours, the textbook definition.
    ``TEAM_TIME`` divides by hours alone, which is how the published
    verification figures were actually computed.  It is the default.
    """

    EQ2 = "eq2"
    TEAM_TIME = "teamtime"

    @classmethod
    def parse(cls, text: str) -> "IpmMode":
        key = text.strip().lower().replace("_", "").replace("-", "")
        for mode in cls:
            if mode.value == key:
                return mode
        raise ValidationError(f"unknown IPM mode {text!r}")


@dataclass(frozen=True)
class PhaseRecord:
    phase: Phase
    total_defects: int
    defects_inspection: int
    defects_testing: int
    inspection_time: float
    preparation_time: float
    inspector_count: int
    experience_years: float

    @property
    def total_time(self) -> float:
        return self.inspection_time + self.preparation_time

    @property
    def inspection_effort(self) -> float:
        return self.inspector_count * self.total_time

    def problems(self) -> list[tuple[str, str]]:
        """Hard invariant violations as ``(field, message)`` pairs."""
        out = []
        for name in ("total_defects", "defects_inspection", "defects_testing"):
            if getattr(self, name) < 0:
                out.append((name, "must be >= 0"))
        for name in ("inspection_time", "preparation_time", "experience_years"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                out.append((name, "must be finite and >= 0"))
        if self.inspector_count < 1:
            out.append(("inspector_count", "must be >= 1"))
        if self.defects_inspection > self.total_defects:
            out.append(("defects_inspection", "exceeds total_defects"))
        return out

    @property
    def defects_balance(self) -> bool:
        return self.defects_inspection + self.defects_testing == self.total_defects


@dataclass(frozen=True)
class ProjectRecord:
    id: str
    total_hours: float
    phases: tuple[PhaseRecord, ...]
    function_points: int | None = None

    def __post_init__(self) -> None:
        if not (self.total_hours > 0 and math.isfinite(self.total_hours)):
            raise ValidationError(f"project {self.id}: total_hours must be > 0")
        seen = [p.phase for p in self.phases]
        if sorted(seen, key=_PHASE_ORDER.index) != list(Phase) or len(seen) != 3:
            raise ValidationError(
                f"project {self.id}: needs exactly one record per phase, got {[p.value for p in seen]}"
            )
        if self.function_points is not None and self.function_points < 1:
            raise ValidationError(f"project {self.id}: function_points must be >= 1")

    def phase(self, phase: Phase) -> PhaseRecord:
        for record in self.phases:
            if record.phase is phase:
                return record
        raise KeyError(phase)

    @property
    def effective_function_points(self) -> int:
        if self.function_points is not None:
            return self.function_points
        return estimate_function_points(self.total_hours)

    @property
    def size(self) -> SizeClass:
        return classify_size(self.total_hours)


_PHASE_ORDER = list(Phase)

PARAMETERS = ("x1", "x2", "x3", "x4", "x5")
PARAMETER_NAMES = {
    "x1": "inspection_time",
    "x2": "preparation_time",
    "x3": "inspector_count",
    "x4": "experience_years",
    "x5": "complexity",
}


@dataclass(frozen=True)
class FeatureVector:
    """Regressors of the five-variable model, in raw units."""

    x1: float
    x2: float
    x3: float
    x4: float
    x5: float

    def __post_init__(self) -> None:
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ValidationError(f"feature {f.name} must be finite")

    def __iter__(self) -> Iterator[float]:
        return iter(self.as_tuple())

    def __len__(self) -> int:
        return 5

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.x1, self.x2, self.x3, self.x4, self.x5)

    def get(self, parameter: str | int) -> float:
        return getattr(self, parameter_key(parameter))

    def with_value(self, parameter: str | int, value: float) -> "FeatureVector":
        values = dict(zip(PARAMETERS, self.as_tuple()))
        values[parameter_key(parameter)] = value
        return FeatureVector(**values)

    @classmethod
    def of(cls, values: Sequence[float]) -> "FeatureVector":
        if len(values) != 5:
            raise ValidationError(f"expected 5 feature values, got {len(values)}")
        return cls(*(float(v) for v in values))


def parameter_key(parameter: str | int) -> str:
    """Normalise ``1``, ``"x1"`` or ``"inspection_time"`` to ``"x1"``."""
    if isinstance(parameter, int) and not isinstance(parameter, bool):
        if 1 <= parameter <= 5:
            return f"x{parameter}"
    elif isinstance(parameter, str):
        key = parameter.strip().lower()
        if key in PARAMETERS:
            return key
        for short, long in PARAMETER_NAMES.items():
            if key == long:
                return short
    raise ValidationError(f"unknown model parameter {parameter!r}")


def parameter_admissible(parameter: str | int, value: float, slack: float = 0.0) -> bool:
    key = parameter_key(parameter)
    if not math.isfinite(value):
        return False
    if key == "x3":
        return value >= 1 - slack
    if key == "x5":
        return -slack <= value <= 1 + slack
    return value >= -slack


def admissible_range_text(parameter: str | int) -> str:
    key = parameter_key(parameter)
    return {"x3": ">= 1", "x5": "within [0, 1]"}.get(key, ">= 0")


def depth_of_inspection(defects_inspection: int, total_defects: int) -> float:
    if total_defects == 0:
        raise DomainError("no defects observed")
    if total_defects < 0 or defects_inspection < 0:
        raise ValidationError("defect counts must be >= 0")
    if defects_inspection > total_defects:
        raise ValidationError(
            f"defects found by inspection ({defects_inspection}) exceed total ({total_defects})"
        )
    return defects_inspection / total_defects


def inspection_performance(
    defects_inspection: int,
    inspection_time: float,
    preparation_time: float,
    inspector_count: int = 1,
    mode: IpmMode = IpmMode.TEAM_TIME,
) -> float:
    total_time = inspection_time + preparation_time
    if total_time == 0:
        raise DomainError("zero inspection time")
    if inspection_time < 0 or preparation_time < 0:
        raise ValidationError("inspection and preparation time must be >= 0")
    if mode is IpmMode.EQ2:
        if inspector_count < 1:
            raise ValidationError("inspector count must be >= 1")
        return defects_inspection / (inspector_count * total_time)
    return defects_inspection / total_time


def record_di(record: PhaseRecord) -> float:
    return depth_of_inspection(record.defects_inspection, record.total_defects)


def record_ipm(record: PhaseRecord, mode: IpmMode = IpmMode.TEAM_TIME) -> float:
    return inspection_performance(
        record.defects_inspection,
        record.inspection_time,
        record.preparation_time,
        record.inspector_count,
        mode,
    )


def complexity_x5(function_points: float) -> float:
    """Project complexity on a log scale: 0 at one FP, 1 at 10000 FP."""
    if not function_points >= 1:
        raise DomainError(f"function points must be >= 1, got {function_points}")
    return math.log10(function_points) / 4


def estimate_function_points(total_hours: float) -> int:
    if not total_hours > 0:
        raise ValidationError(f"total hours must be > 0, got {total_hours}")
    # round half up; Python's round() would send 2.5 to 2
    return max(1, int(math.floor(total_hours / HOURS_PER_FUNCTION_POINT + 0.5)))


def classify_size(total_hours: float) -> SizeClass:
    if not total_hours > 0:
        raise ValidationError(f"total hours must be > 0, got {total_hours}")
    if total_hours < SMALL_LIMIT_HOURS:
        return SizeClass.SMALL
    if total_hours <= MEDIUM_LIMIT_HOURS:
        return SizeClass.MEDIUM
    return SizeClass.LARGE


def band_experience(years: float) -> ExperienceBand:
    if not years >= 0:
        raise ValidationError(f"experience must be >= 0 years, got {years}")
    if years < NOVICE_LIMIT_YEARS:
        return ExperienceBand.NOVICE
    if years <= AVERAGE_LIMIT_YEARS:
        return ExperienceBand.AVERAGE
    return ExperienceBand.EXPERIENCED


def derive_features(record: PhaseRecord, project: ProjectRecord) -> FeatureVector:
    if not any(p is record or p == record for p in project.phases):
        raise ValidationError(f"phase record does not belong to project {project.id}")
    return FeatureVector(
        x1=float(record.inspection_time),
        x2=float(record.preparation_time),
        x3=float(record.inspector_count),
        x4=float(record.experience_years),
        x5=complexity_x5(project.effective_function_points),
    )
