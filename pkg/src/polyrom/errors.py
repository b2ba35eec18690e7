"""Exception types shared across the toolkit."""


class PolyromError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(PolyromError, ValueError):
    """Raised when arguments violate a documented precondition."""


class NumericalBlowupError(PolyromError, RuntimeError):
    """Raised when the time integration produces non-finite values.

    Attributes:
        time: simulation time at which the blowup was detected.
    """

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class IllConditionedError(PolyromError, RuntimeError):
    """Raised when a filter update encounters a numerically singular
    innovation covariance or an unrecoverable Cholesky failure."""
