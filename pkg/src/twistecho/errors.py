"""Exception types shared across the package."""


class TwistEchoError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(TwistEchoError):
    """State and operator live on different systems."""


class UndefinedSignalError(TwistEchoError):
    """The interferometric signal vanishes, so a ratio is undefined."""


class DegenerateStateError(TwistEchoError):
    """A state has no usable noise quadrature (zero variance)."""


class CalibrationError(TwistEchoError):
    """A squeezing target cannot be reached on the initial branch."""

    def __init__(self, message: str, achievable_db: float | None = None):
        super().__init__(message)
        self.achievable_db = achievable_db


class OutOfWindowError(TwistEchoError):
    """One-mode formulas requested outside their numerical validity window."""


class InvariantViolationError(TwistEchoError):
    """A numerical self-check failed beyond its tolerance."""


class ConfigError(TwistEchoError):
    """Invalid run configuration."""
