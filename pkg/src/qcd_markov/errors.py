"""Exception hierarchy shared by every module of the package."""


class QCDError(Exception):
    """Base class for all package errors."""


class ValidationError(QCDError, ValueError):
    """Input failed a structural or probabilistic check."""


class NonStochastic(ValidationError):
    pass


class NegativeEntry(ValidationError):
    pass


class DimensionTooSmall(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NotErgodic(ValidationError):
    pass


class InvalidChangeTime(ValidationError):
    pass


class InvalidCost(ValidationError):
    pass


class ConfigError(ValidationError):
    """Malformed experiment configuration; message names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class NoConvergence(QCDError, RuntimeError):
    pass


class ImpossibleObservation(QCDError, RuntimeError):
    """The observed state has zero probability under both augmented blocks."""


class ImpossibleTransition(QCDError, RuntimeError):
    """The observed transition has zero probability given the current posterior."""


class AlreadyStopped(QCDError, RuntimeError):
    pass


class NoRoot(QCDError, ValueError):
    pass


class InsufficientSamples(QCDError, RuntimeError):
    """No posterior excursion entered the conditioning band.

    The empty estimate (``samples == 0``) is attached as ``estimate``.
    """

    def __init__(self, message: str, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class NonMonotone(UserWarning):
    """Sampled values of a bracketed function were not monotone."""
