"""Exception types shared across the package.

The CLI maps these onto exit statuses: usage problems exit 1, DataError
exits 2, NumericError exits 3.
"""


class PccError(Exception):
    """Base class for errors raised by this package."""


class DataError(PccError):
    """Malformed or inconsistent input data (files, manifests, labels)."""


class NumericError(PccError):
    """Numerical failure: non-finite loss, failed gradient check, etc."""
