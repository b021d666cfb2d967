"""Exception types raised across the package."""


class ScreenVPError(Exception):
    """Base class for all package errors."""


class ValidationError(ScreenVPError, ValueError):
    """A configuration or argument violates a stated invariant."""


class NonIntegrable(ValidationError):
    pass


class NonFiniteInput(ValidationError):
    pass


class SupportViolation(ValidationError):
    pass


class FieldFrameMissing(ValidationError):
    pass


class HistoryMissing(ValidationError):
    pass


class WindowTooShort(ValidationError):
    pass


class NumericalError(ScreenVPError, ArithmeticError):
    """A numerical procedure failed to converge or lost accuracy."""


class QuadratureFailure(NumericalError):
    pass


class NotConverged(NumericalError):
    pass


class NotContracting(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class TruncationBreach(NumericalError):
    pass


class TailNotConverged(NumericalError):
    pass


class NotContractingWarning(RuntimeWarning):
    """Picard iteration for the correction fields did not meet tolerance."""
