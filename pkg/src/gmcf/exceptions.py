"""Exception types raised across the package."""


class GmcfError(Exception):
    """Base class for package errors."""


class QuadratureError(GmcfError, ArithmeticError):
    """Numerical integration failed to meet its tolerance."""

    def __init__(self, message, achieved=float("nan")):
        super().__init__(f"{message} (achieved error estimate {achieved:.3g})")
        self.achieved = achieved


class PositiveDefinitenessError(GmcfError, ValueError):
    """A covariance spectrum or matrix has significantly negative eigenvalues."""

    def __init__(self, message, frequency=None, value=None):
        super().__init__(message)
        self.frequency = frequency
        self.value = value


class ResolutionError(GmcfError, ValueError):
    """The spatial grid does not resolve the smallest correlation scale."""

    def __init__(self, message, required_n=None):
        super().__init__(message)
        self.required_n = required_n


class ConfigError(GmcfError, ValueError):
    """An experiment configuration violates a documented constraint."""

    def __init__(self, key, constraint):
        super().__init__(f"{key}: {constraint}")
        self.key = key
        self.constraint = constraint


class UndefinedSlopeError(GmcfError, ValueError):
    """The linear barrier slope is only defined for gaps of at least e."""
