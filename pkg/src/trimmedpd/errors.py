"""Exception hierarchy."""


class TrimmedPDError(Exception):
    """Base class for package errors."""


class DomainError(TrimmedPDError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InsufficientEnumerationError(TrimmedPDError, ValueError):
    """Too few jumps or points were enumerated for the request."""

    def __init__(self, message: str, required: int | None = None):
        super().__init__(message)
        self.required = required


class NumericalError(TrimmedPDError, ArithmeticError):
    """A numerical self-check (quadrature, normalization, inversion) failed."""


class RangeError(TrimmedPDError, ValueError):
    """Evaluation requested outside a validated range."""


class FitError(TrimmedPDError, ValueError):
    """Rank-size fitting failed."""
