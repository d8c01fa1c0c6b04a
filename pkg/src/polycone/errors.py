"""Exception hierarchy shared by all modules."""


class PolyconeError(Exception):
    """Base class for errors raised by this package."""


class InputError(PolyconeError, ValueError):
    """Malformed or mismatched input (dimensions, degrees, file fields)."""


class DegenerateInputError(InputError):
    """Generators are numerically rank deficient."""


class StructuralError(PolyconeError, ValueError):
    """Input violates a structural requirement, e.g. r not in the span."""


class RankError(PolyconeError, ValueError):
    """Point set or quadratic form does not have full rank."""


class ConfigurationError(PolyconeError, ValueError):
    """Incompatible options, e.g. an oracle used outside its degree range."""


class GridTooCoarseError(PolyconeError, RuntimeError):
    """Too few near-boundary samples to build a decomposition of identity."""


class InternalConsistencyError(PolyconeError, RuntimeError):
    """An invariant that should hold for valid input was violated."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigurationWarning(UserWarning):
    """Parameters outside the range where guarantees are meaningful."""
