"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: validation 2, infeasible 3,
numerical non-convergence 4.
"""


class MTDError(Exception):
    """Base class for all package errors."""


class InvalidParameter(MTDError, ValueError):
    """An input violates a documented precondition."""


class ParseError(InvalidParameter):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DomainError(InvalidParameter):
    """A function was evaluated outside its domain."""


class StabilityError(InvalidParameter):
    """Integrator step too large for the configured dynamics."""


class InfeasibleError(MTDError, ValueError):
    """The requested occupancy cannot be met by any admissible schedule."""

    def __init__(self, message: str, bound: float | None = None):
        self.bound = bound
        super().__init__(message)


class ConvergenceError(MTDError, ArithmeticError):
    """An iterative method failed to converge."""

    def __init__(self, message: str, last_iterate=None):
        self.last_iterate = last_iterate
        super().__init__(message)
