"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class BeamsimError(Exception):
    """Base class for all beamsim errors."""


class ConfigError(BeamsimError, ValueError):
    """Invalid configuration or incompatible parameters."""


class DataError(BeamsimError, ValueError):
    """Malformed or inconsistent data (files, records, shapes)."""


class NumericError(BeamsimError, ArithmeticError):
    """Numerical failure (divergence, NaN loss, zero-energy channel)."""
