"""Peierls brackets for Lagrangian systems.

Reference solutions, Jacobi linearizations, commutator kernels and the
brackets they induce, for particles on flat and curved configuration
spaces, finite-dimensional Schrodinger dynamics and a lattice
Klein-Gordon field.
"""
from .errors import *  # noqa: F401,F403
from .lagrangian import (  # noqa: F401
    ConfigurationModel,
    MetricData,
    PathFunctional,
    Trajectory,
    functional_gradient,
    functional_value,
    point_evaluation,
    polynomial_density,
)

__version__ = "0.1.0"
