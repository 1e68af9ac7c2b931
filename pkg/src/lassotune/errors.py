"""Exception types shared across the package."""


class LassotuneError(Exception):
    """Base class for all package errors."""


class InvalidConfigError(LassotuneError, ValueError):
    """A configuration value violates its contract."""


class DegenerateProblemError(LassotuneError):
    """The problem instance admits no meaningful fit (zero signal, zero residual)."""


class SaturatedModelError(LassotuneError):
    """A selected model uses as many degrees of freedom as there are observations."""


class ConvergenceError(LassotuneError):
    """An iterative solver hit its iteration cap.

    The last iterate is attached so callers can inspect or salvage it.
    """

    def __init__(self, message, last_result=None):
        super().__init__(message)
        self.last_result = last_result
