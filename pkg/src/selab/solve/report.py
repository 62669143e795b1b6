from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CONVERGED = "Converged"
DIVERGED = "Diverged"
STALLED = "Stalled"
NO_SOLUTION = "NoSolutionEvidence"
STATUSES = (CONVERGED, DIVERGED, STALLED, NO_SOLUTION)


@dataclass
class SolveReport:
    status: str
    solution: np.ndarray | None = None
    iterations: int = 0
    final_residual: float = math.inf
    sup_norm: float = math.nan
    h1_seminorm: float = math.nan
    epsilon_schedule_used: list = field(default_factory=list)
    min_interior_value: float = math.nan
    reason: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def to_dict(self, include_solution: bool = True) -> dict:
        out = {
            "status": self.status,
            "iterations": self.iterations,
            "final_residual": _num(self.final_residual),
            "sup_norm": _num(self.sup_norm),
            "h1_seminorm": _num(self.h1_seminorm),
            "epsilon_schedule_used": [_num(e) for e in self.epsilon_schedule_used],
            "min_interior_value": _num(self.min_interior_value),
            "reason": self.reason,
            "meta": {k: _jsonable(v) for k, v in sorted(self.meta.items())},
        }
        if include_solution:
            out["solution"] = None if self.solution is None else [_num(v) for v in self.solution]
        return out


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return _num(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v
