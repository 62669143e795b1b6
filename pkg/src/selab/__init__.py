"""Finite-difference laboratory for singular semilinear elliptic Dirichlet problems."""

from .continuation import (
    ThresholdBracket,
    atlas,
    blowup_profile,
    bracket_threshold,
    fold_scan,
    solve_problem,
    sweep,
    upclosure_violations,
)
from .diagnostics import (
    EnergyBoundParams,
    energy_bound_check,
    expected_membership,
    fit_boundary_rate,
    h1_membership,
    lazer_mckenna_check,
    linear_bounds_check,
    reciprocal_residual,
)
from .mesh import Mesh, build_mesh
from .operator import EigenPair, assemble, eigenpair
from .problem import CoefficientSpec, FSpec, GSpec, ProblemInstance, check_hypotheses, g_integral_divergent
from .solve import SolveReport, exp_transform_solve, solve_regularized, solve_singular

__version__ = "0.1.0"

__all__ = [
    "CoefficientSpec", "EigenPair", "EnergyBoundParams", "FSpec", "GSpec", "Mesh", "ProblemInstance",
    "SolveReport", "ThresholdBracket", "assemble", "atlas", "blowup_profile", "bracket_threshold",
    "build_mesh", "check_hypotheses", "eigenpair", "energy_bound_check", "exp_transform_solve", "expected_membership",
    "fit_boundary_rate", "fold_scan", "g_integral_divergent", "h1_membership", "lazer_mckenna_check",
    "linear_bounds_check", "reciprocal_residual", "solve_problem", "solve_regularized", "solve_singular",
    "sweep", "upclosure_violations",
]
