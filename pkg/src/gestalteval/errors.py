"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, the data-side
errors (GgfsFormatError, DataError, CapacityError) -> 3.
"""


class GestaltEvalError(Exception):
    """Base class for all package errors."""


class ConfigError(GestaltEvalError, ValueError):
    """Invalid configuration: bad lambda range, bad spec counts, bad flags."""


class DataError(GestaltEvalError, ValueError):
    """A dataset violates its invariants (dimensions, finiteness, indices)."""


class GgfsFormatError(DataError):
    """A GGFS byte stream cannot be decoded.

    ``offset`` is the byte position at which decoding failed, when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class CapacityError(DataError):
    """A dataset cannot support the requested episode shape."""


class DegenerateObserverError(GestaltEvalError, ValueError):
    """Both observer variances are zero in some dimension; fusion is ill-posed."""
