"""Exception hierarchy.

Input and configuration problems derive from :class:`InputError` (the CLI maps
them to exit status 2); everything else signals a broken construction.
"""


class GhsError(Exception):
    pass


class InputError(GhsError):
    pass


class ConfigurationError(InputError):
    pass


class GraphFormatError(InputError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ArgumentError(InputError, ValueError):
    pass


class GenerationError(InputError):
    pass


class ScaleError(InputError):
    pass


class DegenerateVertexError(GhsError):
    pass


class NoPathError(GhsError):
    pass


class HypothesisViolation(GhsError):
    pass


class DecompositionError(GhsError):
    """Raised when a built decomposition fails one of its structural checks."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class PartitionGapError(DecompositionError):
    pass


class InternalError(GhsError):
    pass
