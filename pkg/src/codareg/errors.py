"""Exception and warning types shared across the package.

Every error raised by this package derives from :class:`CodaError`, so
callers can catch one base type at an API boundary.  Most concrete
classes also inherit the closest builtin (``ValueError``, ``KeyError``,
``IndexError``) so that generic exception handling keeps working.
"""

__all__ = [
    "CodaError",
    "ClosureError",
    "ZeroComponentError",
    "AllZeroError",
    "DimensionMismatchError",
    "EmptyRowError",
    "UnknownLabelError",
    "IndexOutOfRangeError",
    "WrongMethodError",
    "RankDeficientError",
    "DomainError",
    "MissingCovarianceError",
    "MissingColumnError",
    "TypeParseError",
    "UnknownCategoryError",
    "EmptySplitError",
    "AllZeroExpectedError",
    "ZeroReplacementWarning",
    "NonConvergenceWarning",
]


class CodaError(Exception):
    """Base class for all errors raised by this package."""


class ClosureError(CodaError, ValueError):
    """A vector does not sum to the stated closure constant within tolerance."""


class ZeroComponentError(CodaError, ValueError):
    """A composition contains a zero (or negative) part where positivity is required."""


class AllZeroError(CodaError, ValueError):
    """Every entry of a vector is zero, so it cannot be scaled to the simplex."""


class DimensionMismatchError(CodaError, ValueError):
    """Operands have incompatible dimensions."""


class EmptyRowError(CodaError, ValueError):
    """A table row has zero total and admits no proportions."""


class UnknownLabelError(CodaError, KeyError):
    """A row label referenced in a grouping does not exist in the table."""


class IndexOutOfRangeError(CodaError, IndexError):
    """A 1-based component index falls outside ``1..d``."""


class WrongMethodError(CodaError, ValueError):
    """A result or coordinate vector was produced by a different method than required."""


class RankDeficientError(CodaError, ValueError):
    """A matrix has lower rank than the operation requires."""


class DomainError(CodaError, ValueError):
    """A numeric argument lies outside the mathematical domain of the function."""


class MissingCovarianceError(CodaError, ValueError):
    """A fit carries no covariance matrix, so standard errors cannot be formed."""


class MissingColumnError(CodaError, KeyError):
    """An input table lacks one or more required columns."""


class TypeParseError(CodaError, ValueError):
    """A cell value could not be parsed as the type its column requires."""


class UnknownCategoryError(CodaError, ValueError):
    """A categorical cell holds a value outside the known category set."""


class EmptySplitError(CodaError, ValueError):
    """A train/test split left one side with no rows."""


class AllZeroExpectedError(CodaError, ValueError):
    """Every expected count is below the usable threshold; the statistic is undefined."""


class ZeroReplacementWarning(UserWarning):
    """The replacement value is not small relative to the observed positive parts."""


class NonConvergenceWarning(UserWarning):
    """An iterative fit stopped at its iteration cap before meeting its tolerance."""
