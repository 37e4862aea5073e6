"""Exception types shared across the package.

The CLI maps these onto exit codes: DataError -> 2, NumericError -> 3.
Argument/usage problems exit with 1.
"""


class DataError(Exception):
    """Input data is unreadable, malformed, or inconsistent."""


class NumericError(Exception):
    """A computation is undefined or degenerate for the given input."""
