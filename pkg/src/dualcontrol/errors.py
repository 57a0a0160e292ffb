"""Exception types raised across the package."""


class DualControlError(Exception):
    """Base class for all package errors."""


class DomainError(DualControlError, ValueError):
    """An argument lies outside the domain of a function (e.g. non-positive wealth)."""


class ConfigError(DualControlError, ValueError):
    """Invalid simulation or experiment configuration."""


class NotPositiveSemiDefinite(DualControlError, ValueError):
    """A correlation matrix has a negative pivot."""


class SingularSigma(DualControlError, ValueError):
    """The asset loading matrix cannot be inverted at the requested time."""


class NegativeVariance(DualControlError, ValueError):
    """Closed-form log-kernel variance is negative beyond round-off."""


class BracketError(DualControlError, RuntimeError):
    """A one-dimensional root is not bracketed by the search interval."""


class NoConvergence(DualControlError, RuntimeError):
    """An iterative solver exhausted its iteration budget."""
