"""Limiting absorption in the plane: kernels, finite differences and studies.

The package solves ``-div(a grad u) + sigma u = f`` in R^2 for a symmetric
elliptic ``a`` equal to the identity outside a disk, with ``sigma = i eps``
(zero energy) or ``sigma = -k^2 - i eps`` (Helmholtz), and follows the
solutions as ``eps -> 0`` and ``k -> 0``.
"""
from .errors import (CoefficientError, CoincidentPointsError, ConfigurationError,
                     DomainError, Lap2dError, OracleMisuseError, PointInsideError,
                     SolverError)
from .grid import Grid, GridField
from .problem import (CoefficientField, Problem, SourceTerm, SpectralShift,
                      builtin_problems, get_problem, validate_coefficients)
from .fd_solver import BoundaryClosure, assemble, conv_oracle, solve
from .exterior import (BoundaryTrace, exterior_eval, exterior_gradient, flux,
                       flux_conservation, radiation_residual, trace_on_circle)
from .analysis import (ConvergenceLadder, DecayFit, WeightedNorms, compute_norms,
                       fit_decay, ladder)
from .harness import StudyConfig, StudyReport, load_config, run_study

__version__ = "0.1.0"

__all__ = [
    "Lap2dError", "CoincidentPointsError", "DomainError", "CoefficientError",
    "PointInsideError", "OracleMisuseError", "ConfigurationError", "SolverError",
    "Grid", "GridField", "CoefficientField", "Problem", "SourceTerm", "SpectralShift",
    "builtin_problems", "get_problem", "validate_coefficients", "BoundaryClosure",
    "assemble", "conv_oracle", "solve", "BoundaryTrace", "exterior_eval",
    "exterior_gradient", "flux", "flux_conservation", "radiation_residual",
    "trace_on_circle", "ConvergenceLadder", "DecayFit", "WeightedNorms", "compute_norms",
    "fit_decay", "ladder", "StudyConfig", "StudyReport", "load_config", "run_study",
]
