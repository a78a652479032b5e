"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class CausalcastError(Exception):
    """Base class for all causalcast errors."""


class ConfigError(CausalcastError):
    """Invalid or inconsistent pipeline configuration."""


class DataError(CausalcastError):
    """Malformed, out-of-range, or otherwise unusable input data."""


class NumericalError(CausalcastError):
    """Numerical failure: non-finite loss, degenerate design matrix, etc."""
