"""Exception hierarchy shared by the analysis, simulation and CLI layers."""


class CyclostabError(Exception):
    """Base class for all package errors."""


class ValidationError(CyclostabError, ValueError):
    """Invalid parameters or inconsistent dimensions."""


class DomainError(CyclostabError, ValueError):
    """A nonlinearity was evaluated outside its declared domain."""


class QuadratureError(CyclostabError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ConsistencyError(CyclostabError):
    """An internal numerical invariant was violated.

    Raised when a result contradicts a guarantee that holds in exact
    arithmetic, which signals a numerics bug rather than bad input.
    """


class LyapunovError(CyclostabError):
    """No positive definite solution of the Lyapunov equation exists."""


class ConvergenceError(CyclostabError):
    """An iterative solver failed; carries the best iterate found."""

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class SimulationError(CyclostabError):
    """Time integration aborted (non-finite state or step underflow)."""

    def __init__(self, message, last_time=None, trajectory=None):
        super().__init__(message)
        self.last_time = last_time
        self.trajectory = trajectory


class StiffnessError(SimulationError):
    """The diffusive stability guard drove the step below its floor."""


class PreconditionError(CyclostabError):
    """An operation was called outside the regime where it is meaningful."""


class ConfigError(CyclostabError):
    """Scenario configuration is malformed; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
