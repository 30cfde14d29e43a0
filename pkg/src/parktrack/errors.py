"""Exception types raised across the package."""


class ParktrackError(Exception):
    """Base class for all package errors."""


class InvalidInputError(ParktrackError, ValueError):
    """An argument violates a documented precondition."""


class SingularFitError(ParktrackError):
    """The constrained least-squares system is rank deficient."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class DegenerateParametrizationError(ParktrackError):
    """Curve speed |(x', y')| vanished where curvature was requested."""


class NoAdmissibleGainsError(ParktrackError):
    """No controller gains satisfy the D-stability region."""

    def __init__(self, message, speed=None):
        super().__init__(message)
        self.speed = speed


class DivergenceError(ParktrackError):
    """Closed-loop simulation blew up."""

    def __init__(self, message, step=None, controller=None):
        super().__init__(message)
        self.step = step
        self.controller = controller


class NumericalError(ParktrackError):
    """Internal numerical failure (ill-conditioned recursion, cancellation)."""
