"""Exception hierarchy shared by every gcnbench module."""


class GcnBenchError(Exception):
    """Base class for all gcnbench errors."""


class ConfigError(GcnBenchError, ValueError):
    """Invalid configuration (batch size, dims, modes)."""


class DegenerateInputError(ConfigError):
    pass


class ShapeError(GcnBenchError, ValueError):
    pass


class BoundsError(GcnBenchError, IndexError):
    pass


class NumericError(GcnBenchError, ArithmeticError):
    pass


class InvariantError(GcnBenchError, AssertionError):
    pass


class CapacityError(GcnBenchError):
    """Work does not fit in the modeled device or requested edge budget."""


class InfeasibleError(CapacityError):
    pass


class ComparisonError(GcnBenchError, ValueError):
    pass


class ParseError(GcnBenchError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatError(GcnBenchError, ValueError):
    """Binary file with a wrong magic number or version."""


class TruncatedFileError(GcnBenchError, OSError):
    pass
