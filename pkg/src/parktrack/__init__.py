"""Parking-maneuver path planning and robust steering control workbench."""

from .errors import (
    DegenerateParametrizationError,
    DivergenceError,
    InvalidInputError,
    NoAdmissibleGainsError,
    NumericalError,
    ParktrackError,
    SingularFitError,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateParametrizationError",
    "DivergenceError",
    "InvalidInputError",
    "NoAdmissibleGainsError",
    "NumericalError",
    "ParktrackError",
    "SingularFitError",
    "__version__",
]
