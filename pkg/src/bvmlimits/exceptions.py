"""Exception types shared across the package."""


class BvmLimitsError(Exception):
    """Base class for all package errors."""


class DomainError(BvmLimitsError, ValueError):
    """A point lies outside the domain of an evaluator (e.g. log of a zero mean)."""


class DimensionError(BvmLimitsError, ValueError):
    """Array shapes are inconsistent with the model dimensions."""


class SingularInformationError(BvmLimitsError):
    """The information matrix is not positive definite.

    Usually caused by collinear design columns; enlarge the model or merge
    the offending columns.
    """


class NonconvergenceError(BvmLimitsError):
    """An iterative routine exhausted its iteration budget."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class GeometryError(BvmLimitsError, ValueError):
    """Scanner geometry produces an unusable system matrix."""


class ParameterRegimeError(BvmLimitsError):
    """A sampler stalled; the parameter combination is outside the usable regime."""


class InsufficientSamplesError(BvmLimitsError):
    """Too few effective samples to compute the requested summary."""


class ConfigError(BvmLimitsError, ValueError):
    """An experiment configuration failed validation."""
