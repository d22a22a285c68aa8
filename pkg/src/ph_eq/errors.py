"""Exception types raised across the package."""


class PhEqError(Exception):
    """Base class for all package errors."""


class DomainError(PhEqError, ValueError):
    """A state lies outside the domain on which a model is defined."""


class PreconditionError(PhEqError, ValueError):
    """An operation was called on inputs that violate its precondition."""


class ConvergenceError(PhEqError, RuntimeError):
    """An iterative solver did not converge.

    ``residual`` carries the last (or best) residual norm seen, when known.
    """

    def __init__(self, message, residual=None):
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)
        self.residual = residual


class IntegrationError(PhEqError, RuntimeError):
    """The ODE integrator failed (step-size underflow, non-finite state)."""
