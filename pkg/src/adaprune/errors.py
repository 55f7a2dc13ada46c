"""Exception types shared across the package."""


class AdapruneError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(AdapruneError):
    """Operands have incompatible or malformed dimensions."""


class SingularMatrixError(AdapruneError):
    """A matrix that must be positive definite failed to factor or divide.

    ``pivot`` is the zero-based index of the failing pivot when known.
    """

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


class NumericalError(AdapruneError):
    """A computation produced non-finite values."""


class ArchiveError(AdapruneError):
    """A tensor archive could not be parsed or validated."""


class DatasetError(AdapruneError):
    """An on-disk data file violates its documented schema."""


class SoupEvalError(AdapruneError):
    """An evaluation callback failed during greedy weight averaging."""
