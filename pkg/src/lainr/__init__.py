"""Coordinate networks with a learnable Chebyshev activation layer."""

from lainr.errors import (
    ConfigError,
    DomainError,
    LainrError,
    NumericalError,
    ParseError,
    ShapeError,
    UsageError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainError",
    "LainrError",
    "NumericalError",
    "ParseError",
    "ShapeError",
    "UsageError",
]
