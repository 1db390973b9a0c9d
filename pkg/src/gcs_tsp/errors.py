"""Exception types shared across the solver modules."""


class GcsTspError(Exception):
    """Base class for all package errors."""


class InputError(GcsTspError, ValueError):
    """Malformed or inconsistent input (shapes, dimensions, indices)."""


class EmptyPolytopeError(GcsTspError, ValueError):
    """The halfspace system has no feasible point."""


class UnboundedPolytopeError(GcsTspError, ValueError):
    """The halfspace system describes an unbounded set."""


class GuardError(GcsTspError, ValueError):
    """A size guard was violated (e.g. enumeration above its limit)."""


class InfeasibleError(GcsTspError):
    """Forced/forbidden edge constraints admit no spanning structure."""


class NumericalError(GcsTspError, RuntimeError):
    """An iterative solver failed to reach its tolerance.

    ``best`` holds the best iterate found and ``residual`` its certified gap
    (or constraint violation), so callers can decide whether to use it anyway.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
