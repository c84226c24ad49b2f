"""Exception types raised across the package."""


class CatalyticError(Exception):
    """Base class for all errors raised by :mod:`catalytic`."""


class StateError(CatalyticError, ValueError):
    """Input is not a valid probability vector, density matrix or layout."""


class DimensionCapExceeded(CatalyticError):
    """A dense representation would exceed the configured dimension cap.

    ``best_epsilon`` and ``max_n`` are filled in when the error comes from
    copy-number selection, so callers can report the best reachable error.
    """

    def __init__(self, message, *, dimension=None, cap=None, best_epsilon=None, max_n=None):
        super().__init__(message)
        self.dimension = dimension
        self.cap = cap
        self.best_epsilon = best_epsilon
        self.max_n = max_n


class MajorizationError(CatalyticError):
    """The source vector does not majorize the target vector."""


class EntropyGapError(CatalyticError):
    """The target does not have strictly larger entropy than the source."""


class DegenerateTruncation(CatalyticError):
    """Typical truncation removed all of the probability mass."""


class ChannelError(CatalyticError, ValueError):
    """Channel data is inconsistent (weights, unitarity, basis)."""


class SchemaError(CatalyticError, ValueError):
    """JSON input does not match the expected schema; ``path`` names the offending field."""

    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path
