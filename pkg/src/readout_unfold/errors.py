"""Exception hierarchy.

:class:`ValidationError` covers bad inputs (CLI exit code 2) and
:class:`NumericalError` covers solver failures on valid inputs (exit code 3).
"""


class UnfoldingError(Exception):
    """Base class for all package errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


class ValidationError(UnfoldingError, ValueError):
    pass


class NonSquare(ValidationError):
    pass


class NotPowerOfTwo(ValidationError):
    pass


class NegativeEntry(ValidationError):
    pass


class ColumnSumViolation(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class ShotMismatch(ValidationError):
    pass


class EpsOutOfRange(ValidationError):
    pass


class QubitOutOfRange(ValidationError):
    pass


class InvalidB(ValidationError):
    pass


class EmptyIterationList(ValidationError):
    pass


class NumericalError(UnfoldingError, ArithmeticError):
    pass


class SingularMatrix(NumericalError):
    pass


class ZeroDenominator(NumericalError):
    pass


class MaxIterationsExceeded(UserWarning):
    """Emitted (not raised) when an iterative solver hits its iteration cap."""
