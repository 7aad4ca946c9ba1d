"""Exception types raised across the package."""


class StochQspError(Exception):
    """Base class for all package errors."""


class DomainError(StochQspError, ValueError):
    """An evaluation point lies outside [-1, 1] or an operator is not a contraction."""


class ArgumentError(StochQspError, ValueError):
    """A parameter is outside its validity range."""


class DegenerateFitError(StochQspError):
    """A two-point envelope fit touched a zero coefficient."""


class FitError(StochQspError):
    """A two-point envelope fit does not decay (q <= 0)."""


class NoEnvelopeError(StochQspError):
    """No (n1, n2) pair yields a valid geometric envelope for the series."""


class DegenerateEnsembleError(StochQspError):
    """The cutoff degree reaches the target degree, or the sampled tail is empty."""


class PrecisionError(StochQspError):
    """The stored series is too short to stand in for the target function."""


class SolverError(StochQspError):
    """Phase finding did not converge.

    The best phases and residual found are kept on the exception.
    """

    def __init__(self, message, best_phases=None, residual=float("inf")):
        super().__init__(message)
        self.best_phases = best_phases
        self.residual = residual
