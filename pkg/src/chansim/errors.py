"""Exception types raised across the package."""


class ChansimError(Exception):
    """Base class for all package errors."""


class DomainError(ChansimError, ValueError):
    """Input outside the mathematical domain of a function (e.g. non-finite)."""


class StructuralError(ChansimError, ValueError):
    """Array shapes or matrix structure do not satisfy a contract."""


class ValidationError(ChansimError, ValueError):
    """A profile document or configuration failed validation.

    ``field`` names the offending field when it is known.
    """

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class StateError(ChansimError, RuntimeError):
    """Object is in the wrong state for the requested operation."""


class ArgumentError(ChansimError, ValueError):
    """Invalid argument value."""


class NumericalError(ChansimError, ArithmeticError):
    """A numerical procedure failed (singular system, non-convergence)."""
