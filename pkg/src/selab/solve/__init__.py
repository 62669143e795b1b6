from .newton import (
    epsilon_schedule,
    exp_transform_solve,
    h1_seminorm,
    newton_solve,
    solve_regularized,
    solve_singular,
)
from .report import CONVERGED, DIVERGED, NO_SOLUTION, STALLED, SolveReport

__all__ = [
    "CONVERGED", "DIVERGED", "NO_SOLUTION", "STALLED", "SolveReport",
    "epsilon_schedule", "exp_transform_solve", "h1_seminorm", "newton_solve",
    "solve_regularized", "solve_singular",
]
