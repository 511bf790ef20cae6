"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage problems exit 2, data problems
exit 3, configuration problems exit 4.
"""


class MoiError(Exception):
    """Base class for all package errors."""


class DataError(MoiError):
    """Invalid data contents (bad values, mismatched shapes, missing rows)."""


class FormatError(DataError):
    """A file does not parse under its declared format."""


class ConfigError(MoiError):
    """Invalid or unknown pipeline configuration."""


class UsageError(MoiError):
    """Command invoked with missing or contradictory arguments."""
