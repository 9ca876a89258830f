"""Exception hierarchy shared across the package.

Every error raised on purpose derives from :class:`TrajprefError`, so callers
(and the command line front end) can distinguish expected failure modes from
genuine bugs.
"""

from __future__ import annotations


class TrajprefError(Exception):
    """Base class for all errors raised by this package."""


class NumericDomainError(TrajprefError):
    """An input is outside the numeric domain of the operation.

    Raised for non-symmetric or non positive definite matrices, non-finite
    entries, and similar violations.
    """


class IllConditionedError(NumericDomainError):
    """A matrix is too close to singular for the requested operation."""


class InsufficientDataError(TrajprefError):
    """Not enough samples or windows to estimate the requested quantity."""


class ConvergenceError(TrajprefError):
    """An iterative solver exhausted its iteration budget.

    The last iterate is attached so callers can inspect or reuse it.
    """

    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class DegenerateInputError(TrajprefError):
    """Structurally valid input that the operation cannot make sense of."""


class DegenerateTrainingError(TrajprefError):
    """A training set gives the optimizer nothing to fit.

    Examples: a single class present, or all-zero feature differences.
    """


class ParameterError(TrajprefError):
    """A parameter value is out of range or inconsistent with the data."""


class InputError(TrajprefError):
    """Arguments are mutually inconsistent (shape, identity, or label-wise)."""


class ExtractionError(TrajprefError):
    """A requested signal window cannot be cut from the recording."""


class UndefinedMetricError(TrajprefError):
    """A metric has no defined value on the given input (empty after filtering)."""


class DataFormatError(TrajprefError):
    """A serialized artifact does not match the expected on-disk format."""
