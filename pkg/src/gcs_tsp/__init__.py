"""Traveling salesman tours over polytope target sets.

Each target is a convex polytope and the salesman may visit any point in
it. The package provides geometry kernels, fixed-topology realization,
bounded-cost lower bounds, branch and bound, exact solvers and the
augmented-graph construction.
"""
from .errors import (EmptyPolytopeError, GcsTspError, GuardError, InfeasibleError,
                     InputError, NumericalError, UnboundedPolytopeError)
from .geometry import DEFAULT_TOL, Polytope, chebyshev_center, contains, min_distance, project
from .instance import BoundedCostMatrix, Instance, bounded_matrix, generate

__version__ = "0.1.0"

__all__ = [
    "BoundedCostMatrix", "DEFAULT_TOL", "EmptyPolytopeError", "GcsTspError", "GuardError",
    "InfeasibleError", "InputError", "Instance", "NumericalError", "Polytope",
    "UnboundedPolytopeError", "bounded_matrix", "chebyshev_center", "contains", "generate",
    "min_distance", "project",
]
