"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 1,
DataError -> 2, NumericalError -> 3.
"""


class GamapError(Exception):
    """Base class for all package errors."""


class ConfigError(GamapError):
    """Bad configuration file, unknown key, or invalid parameter combination."""


class DataError(GamapError):
    """Malformed input file or a dataset that violates a precondition."""


class NumericalError(GamapError):
    """Non-finite values or a failed numerical routine."""
