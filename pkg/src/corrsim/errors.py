"""Exception types shared across the package.

The CLI maps these to exit codes: ConfigError -> 1 (usage), FormatError /
DataError / ShapeError -> 2 (data), NumericError -> 3 (numeric failure).
"""


class CorrsimError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(CorrsimError):
    """Operands or parameter arrays have incompatible shapes."""


class FormatError(CorrsimError):
    """A file does not conform to its documented format."""


class DataError(CorrsimError):
    """Structurally valid input that violates a semantic requirement."""


class ConfigError(CorrsimError):
    """Invalid configuration value or flag combination."""


class NumericError(CorrsimError):
    """Non-finite values or other numeric breakdown during computation."""
