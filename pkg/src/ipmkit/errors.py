"""Exception hierarchy shared by every ipmkit module."""

from __future__ import annotations


class IpmError(Exception):
    """Base class for all ipmkit failures."""


class ValidationError(IpmError, ValueError):
    """Input violates a documented precondition or record invariant."""


class DomainError(IpmError, ValueError):
    """A metric is mathematically undefined for the given input."""


class ParseError(ValidationError):
    """A dataset or coefficient document could not be read.

    ``line`` and ``field`` locate the problem when known.
    """

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class NumericalError(IpmError):
    """Base class for failures of the numerical machinery."""


class SingularSystemError(NumericalError):
    """Elimination hit a pivot at or below tolerance."""

    def __init__(self, message: str, pivot_index: int):
        self.pivot_index = pivot_index
        super().__init__(f"{message} (pivot {pivot_index})")


class EmptyStratumError(ValidationError):
    """No project in the dataset falls into the requested stratum."""


class UnderdeterminedError(ValidationError):
    """Fewer observations than coefficients."""


class NoLeverageError(NumericalError):
    """The freed parameter has a (near) zero coefficient."""
