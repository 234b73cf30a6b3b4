"""Exception types shared across the package."""


class SgnError(Exception):
    """Base class for all package errors."""


class GridMismatchError(SgnError):
    """Fields or operators attached to different grids were combined."""


class DryStateError(SgnError):
    """Water depth reached zero or became negative."""


class NewtonDivergenceError(SgnError):
    """Newton iteration failed to reach the requested residual tolerance.

    Carries the residual trace so callers can inspect the failure.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class SingularJacobianError(SgnError):
    """The Newton Jacobian was (numerically) singular."""

    def __init__(self, message, hint=None):
        if hint:
            message = f"{message} ({hint})"
        super().__init__(message)
        self.hint = hint


class SolverBreakdownError(SgnError):
    """An inner linear solver failed to converge; carries the residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InstabilityError(SgnError):
    """Explicit time integration blew up (field magnitude over threshold)."""


class CertificationError(SgnError):
    """A scenario's exact solution failed its residual certification."""


class ConfigError(SgnError):
    """Invalid or unknown run-configuration input."""
