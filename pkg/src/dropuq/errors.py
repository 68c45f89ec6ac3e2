"""Exception types shared across the package.

Two families: ``ValidationError`` covers bad inputs and bad configuration
(the CLI maps these to exit code 2), ``ComputationError`` covers failures
that occur while a well-formed computation runs (exit code 3).
"""


class ValidationError(ValueError):
    """Invalid input data or configuration."""


class InputShapeError(ValidationError):
    """An array argument has the wrong shape for the model or operation."""


class ParseError(ValidationError):
    """A data file could not be parsed; the message names the offending row."""


class EmptyDataError(ValidationError):
    """An operation that needs at least one sample received none."""


class ComputationError(RuntimeError):
    """A numeric procedure failed while running."""


class TrainingDivergedError(ComputationError):
    """Training produced a non-finite loss.

    Attributes:
        epoch: zero-based epoch index at which the loss became non-finite.
    """

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}: loss is not finite")


class NoBracketError(ComputationError):
    """Bracket expansion could not find a sign change of the balance.

    Attributes:
        sign: sign of the balance on the side that failed to flip (-1 or +1).
    """

    def __init__(self, sign: int, message: str):
        self.sign = sign
        super().__init__(message)


class ConvergenceError(ComputationError):
    """An iterative procedure hit its iteration cap before converging.

    Attributes:
        iterations: number of iterations performed.
        last_value: value of the convergence criterion at the final iterate.
    """

    def __init__(self, iterations: int, last_value: float, message: str):
        self.iterations = iterations
        self.last_value = last_value
        super().__init__(message)
