"""Pair correlation statistics of angles in hyperbolic lattice orbits.

The package computes both sides of the comparison: empirical angular
pair-correlation counts over concrete orbits on the hyperboloid, and the
explicit limiting density they converge to, together with the volume
formulas, asymptotics, and spectrum-recovery procedure tying them together.
"""

from . import density, empirical, geometry, lattice
from .errors import (
    DegenerateInputError,
    DiagnosticError,
    ExhaustionError,
    HyperangleError,
    InvariantViolationError,
    NumericalError,
    ParseError,
    PreconditionError,
    ResourceError,
    UsageError,
)

__version__ = "0.1.0"

__all__ = [
    "density",
    "empirical",
    "geometry",
    "lattice",
    "DegenerateInputError",
    "DiagnosticError",
    "ExhaustionError",
    "HyperangleError",
    "InvariantViolationError",
    "NumericalError",
    "ParseError",
    "PreconditionError",
    "ResourceError",
    "UsageError",
    "__version__",
]
