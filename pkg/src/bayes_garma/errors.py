"""Exception hierarchy shared by every module of the package."""


class GarmaError(Exception):
    """Base class for all package errors."""


class DomainError(GarmaError, ValueError):
    """An argument lies outside the valid domain of a family or operation."""


class DivergenceError(GarmaError, ArithmeticError):
    """The linear-predictor recursion produced a non-finite value.

    Attributes
    ----------
    t : int
        1-based time index at which the recursion diverged.
    """

    def __init__(self, t, message=None):
        self.t = int(t)
        if message is None:
            message = (
                f"linear predictor diverged at t={self.t}; "
                "try smaller AR/MA coefficients"
            )
        super().__init__(message)


class ConvergenceError(GarmaError, RuntimeError):
    """Mode finding failed; ``best`` holds the best point found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class HessianError(GarmaError, RuntimeError):
    """The negative Hessian at the mode is not positive definite."""

    def __init__(self, message, hessian=None):
        super().__init__(message)
        self.hessian = hessian


class SamplerError(GarmaError, RuntimeError):
    """The Metropolis-Hastings chain is unusable (e.g. nothing accepted)."""


class DegenerateChainError(GarmaError, ValueError):
    """A chain segment has zero variance."""


class StudyError(GarmaError, RuntimeError):
    """Too many replications of a Monte-Carlo study failed."""


class ConfigError(GarmaError, ValueError):
    """A run configuration failed validation."""
