"""Exception types shared across the package."""

from __future__ import annotations


class PceGridError(Exception):
    """Base class for all errors raised by :mod:`pcegrid`."""


class DomainError(PceGridError, ValueError):
    """An argument lies outside the domain of an operation."""


class DegreeError(PceGridError, ValueError):
    """A polynomial degree beyond what a recurrence supports was requested."""


class IllConditionedError(PceGridError, ArithmeticError):
    """The moment functional became numerically indefinite.

    Attributes
    ----------
    degree : int
        First degree at which the recurrence could not be continued.
    """

    def __init__(self, degree: int, message: str | None = None):
        self.degree = degree
        super().__init__(message or f"recurrence breaks down at degree {degree}")


class ShapeError(PceGridError, ValueError):
    """Array dimensions do not agree."""


class SizeError(PceGridError, ValueError):
    """Too few samples for the requested statistic."""


class SingularMatrixError(PceGridError, ArithmeticError):
    """A least-squares system is rank deficient."""

    def __init__(self, rank: int, n_columns: int):
        self.rank = rank
        self.n_columns = n_columns
        super().__init__(f"design matrix has numerical rank {rank} < {n_columns} columns")


class LeverageSaturationError(PceGridError, ArithmeticError):
    """A hat-matrix leverage is (numerically) one, so leave-one-out is undefined."""


class FitError(PceGridError, RuntimeError):
    """No candidate model on the regression path could be fitted."""


class ParseError(PceGridError, ValueError):
    """A network case file could not be read.

    Attributes
    ----------
    line : int or None
        1-based line number the problem was detected at.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class NumericalError(PceGridError, ArithmeticError):
    """A power-flow system could not be solved."""


class ConvergenceError(PceGridError, RuntimeError):
    """The cascade loop did not settle within its iteration cap."""
