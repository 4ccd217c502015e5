"""Exception types raised across the package."""


class SanovLabError(Exception):
    """Base class for all package errors."""


class DomainError(SanovLabError, ValueError):
    """A point does not belong to the space it is evaluated in."""


class ArgumentError(SanovLabError, ValueError):
    """An argument violates an operation's precondition."""


class UnsupportedMeasureError(SanovLabError, TypeError):
    """The measure lacks the access (quantiles, cell masses) an operation needs."""


class InfeasibleLiftError(SanovLabError, ValueError):
    """The target measure charges a cell of zero reference mass."""


class InfiniteEntropyError(SanovLabError, ArithmeticError):
    """A relative entropy that was required to be finite is infinite."""


class OptimizerError(SanovLabError, RuntimeError):
    """An inner optimizer stopped without meeting its tolerance.

    Attributes
    ----------
    residual : float
        Final projected-gradient norm (or equivalent residual).
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class ResourceError(SanovLabError, RuntimeError):
    """An enumeration guard would be exceeded."""


class PartitionConsistencyError(SanovLabError, RuntimeError):
    """A point lies in no cell of a partition that is supposed to cover it."""
