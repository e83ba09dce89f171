"""Exception hierarchy shared by every package of the lab."""


class LabError(Exception):
    """Base class for all errors raised by this project."""


class ShapeError(LabError, ValueError):
    """Raised when tensor operands have incompatible shapes."""


class NonFiniteError(LabError, ArithmeticError):
    """Raised when an operation or a gradient produces NaN or Inf."""


class GraphError(LabError, RuntimeError):
    """Raised on misuse of a computation graph."""


class DegeneratePenaltyError(LabError, ZeroDivisionError):
    """Raised when the analytic multiplier is requested with a vanishing TV term."""


class DivergenceError(LabError, RuntimeError):
    """Raised when an edit run diverges."""


class ConfigError(LabError, ValueError):
    """Raised for invalid configuration; the message names the offending field."""


class TripletFormatError(LabError, ValueError):
    """Raised when a dataset line cannot be parsed."""

    def __init__(self, message: str, line_number: int = 0, field: str = ""):
        super().__init__(f"line {line_number}: {message}" if line_number else message)
        self.line_number = line_number
        self.field = field


class WorldExhaustedError(LabError, LookupError):
    """Raised when no fact satisfies a requested shift."""

