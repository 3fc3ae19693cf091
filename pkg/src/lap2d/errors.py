"""Exception hierarchy shared by the kernels, solver and harness."""


class Lap2dError(Exception):
    """Base class for all errors raised by lap2d."""


class CoincidentPointsError(Lap2dError, ValueError):
    """A free-space kernel was evaluated at |x - y| = 0."""


class DomainError(Lap2dError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class CoefficientError(Lap2dError, ValueError):
    """A coefficient field violates symmetry, ellipticity or the identity tail."""


class PointInsideError(Lap2dError, ValueError):
    """An exterior representation was requested at a point inside the trace circle."""


class OracleMisuseError(Lap2dError, ValueError):
    """The convolution oracle was invoked for a non-identity coefficient field."""


class ConfigurationError(Lap2dError, ValueError):
    """A study configuration is invalid or violates a study precondition."""


class SolverError(Lap2dError, RuntimeError):
    """The linear solver broke down or did not reach the requested residual."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
