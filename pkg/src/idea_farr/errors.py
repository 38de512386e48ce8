"""Exception hierarchy shared by all modules.

The CLI maps these onto process exit codes, so each class corresponds to a
distinct failure category rather than to a call site.
"""


class EpiModelError(Exception):
    """Base class for every error raised by this package."""


class ParseError(EpiModelError, ValueError):
    """Input text could not be parsed; ``row`` is the 1-based data row."""

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class ValidationError(EpiModelError, ValueError):
    """Input parsed but violates a data invariant."""


class DomainError(EpiModelError, ValueError):
    """A parameter lies outside the domain of the requested operation."""


class FitError(EpiModelError, RuntimeError):
    """Model fitting failed or produced a non-finite objective."""


class EstimationError(EpiModelError, RuntimeError):
    """An estimator had no usable data."""
