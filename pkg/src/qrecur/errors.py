"""Exception types shared across the package."""

from __future__ import annotations

__all__ = [
    "RecurrenceError",
    "InvalidDimensionError",
    "TruncationTooSmallError",
    "InvalidCoinError",
    "DegenerateCoinError",
    "HorizonExceededError",
    "DomainError",
    "TruncatedModelError",
    "NotRationalInnerError",
    "WindingUndefinedError",
    "PoleError",
    "NotSchurClassError",
    "MemoryBudgetError",
    "InvalidSiteError",
]


class RecurrenceError(Exception):
    """Base class for every error raised by this package."""


class InvalidDimensionError(RecurrenceError, ValueError):
    pass


class TruncationTooSmallError(RecurrenceError, ValueError):
    pass


class InvalidCoinError(RecurrenceError, ValueError):
    pass


class DegenerateCoinError(InvalidCoinError):
    pass


class InvalidSiteError(RecurrenceError, ValueError):
    pass


class HorizonExceededError(RecurrenceError):
    """Requested step count goes past the range where a truncated model is exact."""


class DomainError(RecurrenceError, ValueError):
    """Input lies outside the domain of the operation (e.g. a state not in V)."""


class TruncatedModelError(RecurrenceError):
    """Spectral data was requested for a truncation of an infinite model."""


class NotRationalInnerError(RecurrenceError):
    """A boundary function is not unitary, or its winding number is not an integer."""


class WindingUndefinedError(RecurrenceError):
    """A boundary function vanishes (or nearly so) on the sampling grid."""


class PoleError(RecurrenceError, ZeroDivisionError):
    pass


class NotSchurClassError(RecurrenceError, ValueError):
    pass


class MemoryBudgetError(RecurrenceError, MemoryError):
    def __init__(self, message: str, required_bytes: int):
        super().__init__(message)
        self.required_bytes = required_bytes
