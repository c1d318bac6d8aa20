"""Exception hierarchy shared across the package."""


class LainrError(Exception):
    """Base class for all package errors."""


class ShapeError(LainrError, ValueError):
    """Operand shapes are incompatible."""


class ConfigError(LainrError, ValueError):
    """A model, layer, or run configuration is invalid."""

    def __init__(self, message, fields=None):
        super().__init__(message)
        self.fields = list(fields or [])


class NumericalError(LainrError, ArithmeticError):
    """A non-finite value appeared where finite values are required."""


class DomainError(LainrError, ValueError):
    """An input lies outside the domain of a function."""


class UsageError(LainrError, RuntimeError):
    """An object was used out of order (e.g. backward before forward)."""


class ParseError(LainrError, ValueError):
    """A file could not be decoded."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
