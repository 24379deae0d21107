"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: config errors exit 2, data
errors exit 3, numeric failures exit 4.
"""


class EcnnError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(EcnnError):
    """Invalid configuration value or flag combination."""


class DataError(EcnnError):
    """Problem with input data: missing files, unparseable cells, degenerate datasets."""


class NumericError(EcnnError):
    """Numerical failure during fitting: non-finite values, unsolvable updates."""
