"""Exception hierarchy.

``DataError`` subclasses describe problems with the input data (CLI exit
code 1); ``EstimationError`` subclasses describe numerical failures during
fitting (CLI exit code 2).
"""

from __future__ import annotations


class EndomedError(Exception):
    """Base class for all package errors."""


class DataError(EndomedError):
    pass


class EstimationError(EndomedError):
    pass


class DimensionMismatch(EndomedError, ValueError):
    pass


class SingularDesign(EstimationError):
    """Raised when a cross-moment matrix is numerically singular."""

    def __init__(self, message: str, rcond: float = 0.0):
        super().__init__(message)
        self.rcond = rcond


class NotConverged(EstimationError):
    def __init__(self, iterations: int, gradient_norm: float):
        super().__init__(
            f"probit did not converge after {iterations} iterations "
            f"(gradient inf-norm {gradient_norm:.3e})"
        )
        self.iterations = iterations
        self.gradient_norm = gradient_norm


class SeparationDetected(EstimationError):
    pass


class DegenerateResponse(DataError):
    pass


class EmptyCell(DataError):
    pass


class EmptyGroup(DataError):
    pass


class DegenerateMediator(DataError):
    pass


class DegenerateInstrument(DataError):
    pass


class ExcessiveRedraws(EstimationError):
    pass


class MissingColumn(DataError):
    pass


class ParseError(DataError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r} as a number")
        self.row = row
        self.column = column
        self.value = value


class EmptyAfterFiltering(DataError):
    pass


class EmptyInput(DataError, ValueError):
    pass
