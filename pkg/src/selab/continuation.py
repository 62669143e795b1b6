"""Parameter sweeps, threshold bracketing, existence atlases, blow-up profiles and fold scans."""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import BadInitialBracket, FoldNotResolved
from .mesh import Mesh
from .operator import DiscreteOperator, assemble
from .problem import ProblemInstance
from .solve import CONVERGED, NO_SOLUTION, STALLED, SolveReport, exp_transform_solve, solve_singular
from .solve.shooting import default_center_grid, shoot_radial

log = logging.getLogger(__name__)

SOLVABLE = "Solvable"
UNSOLVABLE = "Unsolvable"
UNRESOLVED = "Unresolved"


def uses_exp_transform(problem: ProblemInstance) -> bool:
    return problem.family in ("ppart", "convection") and problem.grad_exponent == 2.0 and problem.lam > 0


def solve_problem(problem: ProblemInstance, mesh: Mesh, init: np.ndarray | None = None,
                  op: DiscreteOperator | None = None) -> SolveReport:
    """solve_singular, or the exponential transform for quadratic gradient terms."""
    if uses_exp_transform(problem):
        return exp_transform_solve(problem, mesh, init=init, op=op)
    return solve_singular(problem, mesh, init=init, op=op)


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    return grid


def sweep(template: ProblemInstance, param: str, grid, mesh: Mesh, warm_start: bool = True,
          op: DiscreteOperator | None = None) -> list[tuple[float, SolveReport]]:
    """Solve at each grid value, warm-starting from the previous converged solution."""
    grid = _check_grid(grid)
    op = op if op is not None else assemble(mesh)
    out = []
    init = None
    for value in grid:
        rep = solve_problem(template.with_param(param, value), mesh, init=init, op=op)
        out.append((float(value), rep))
        if warm_start and rep.converged:
            init = rep.solution
    return out


@dataclass
class ThresholdBracket:
    param_name: str
    lo: float
    hi: float
    lo_report: SolveReport
    hi_report: SolveReport
    history: list = field(default_factory=list)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def relative_width(self) -> float:
        return self.width / abs(self.lo)

    @property
    def stalled_count(self) -> int:
        return sum(1 for _, status in self.history if status == STALLED)

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    def to_dict(self) -> dict:
        return {
            "param_name": self.param_name,
            "lo": self.lo,
            "hi": self.hi,
            "width": self.width,
            "relative_width": self.relative_width,
            "stalled_count": self.stalled_count,
            "history": [[v, s] for v, s in self.history],
            "lo_report": self.lo_report.to_dict(include_solution=False),
            "hi_report": self.hi_report.to_dict(include_solution=False),
        }


def bracket_threshold(template: ProblemInstance, param: str, lo_init: float, hi_init: float, mesh: Mesh,
                      width_tol: float = 0.01, op: DiscreteOperator | None = None) -> ThresholdBracket:
    """Bisect the solvable/unsolvable classification until hi - lo <= width_tol * lo.

    Anything other than Converged counts as unsolvable.
    """
    if not lo_init < hi_init:
        raise BadInitialBracket("lo_init must be below hi_init")
    op = op if op is not None else assemble(mesh)
    history = []
    lo_rep = solve_problem(template.with_param(param, lo_init), mesh, op=op)
    history.append((float(lo_init), lo_rep.status))
    if not lo_rep.converged:
        raise BadInitialBracket(f"no converged solution at {param}={lo_init} ({lo_rep.status})")
    hi_rep = solve_problem(template.with_param(param, hi_init), mesh, init=lo_rep.solution, op=op)
    history.append((float(hi_init), hi_rep.status))
    if hi_rep.status != NO_SOLUTION:
        raise BadInitialBracket(f"expected NoSolutionEvidence at {param}={hi_init}, got {hi_rep.status}")
    lo, hi = float(lo_init), float(hi_init)
    while hi - lo > width_tol * abs(lo):
        mid = 0.5 * (lo + hi)
        rep = solve_problem(template.with_param(param, mid), mesh, init=lo_rep.solution, op=op)
        history.append((mid, rep.status))
        if rep.converged:
            lo, lo_rep = mid, rep
        else:
            hi, hi_rep = mid, rep
    return ThresholdBracket(param, lo, hi, lo_rep, hi_rep, history)


@dataclass
class AtlasCell:
    lam: float
    mu: float
    status: str
    sup_norm: float
    verdict: str
    h1_seminorm: float = float("nan")
    iterations: int = 0

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "mu": self.mu, "status": self.status, "verdict": self.verdict,
                "sup_norm": self.sup_norm, "h1_seminorm": self.h1_seminorm, "iterations": self.iterations}


def _verdict(status: str) -> str:
    if status == CONVERGED:
        return SOLVABLE
    if status == NO_SOLUTION:
        return UNSOLVABLE
    return UNRESOLVED


def _atlas_cell(template: ProblemInstance, lam: float, mu: float, mesh: Mesh, op: DiscreteOperator | None) -> AtlasCell:
    rep = solve_problem(template.with_param("lambda", lam).with_param("mu", mu), mesh, op=op)
    return AtlasCell(float(lam), float(mu), rep.status, rep.sup_norm, _verdict(rep.status),
                     rep.h1_seminorm, rep.iterations)


def atlas(template: ProblemInstance, lam_grid, mu_grid, mesh: Mesh, op: DiscreteOperator | None = None,
          workers: int = 1) -> list[AtlasCell]:
    """Classify every (lambda, mu) pair; cells are ordered row-major with lambda as the row index.

    Cells whose solve ends Stalled or Diverged are marked Unresolved: they
    sit on the existence boundary, where no verdict is attempted. Every cell
    is a cold solve, so ``workers > 1`` farms them out to processes without
    changing the result.
    """
    lam_grid, mu_grid = _check_grid(lam_grid), _check_grid(mu_grid)
    pairs = [(float(lam), float(mu)) for lam in lam_grid for mu in mu_grid]
    if workers > 1 and len(pairs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_atlas_cell, template, lam, mu, mesh, None) for lam, mu in pairs]
            return [f.result() for f in futures]
    op = op if op is not None else assemble(mesh)
    return [_atlas_cell(template, lam, mu, mesh, op) for lam, mu in pairs]


def upclosure_violations(cells: list[AtlasCell]) -> list[tuple[AtlasCell, AtlasCell]]:
    """Pairs (solvable, unsolvable) where the unsolvable cell dominates in both parameters."""
    solvable = [c for c in cells if c.verdict == SOLVABLE]
    unsolvable = [c for c in cells if c.verdict == UNSOLVABLE]
    return [(s, u) for s in solvable for u in unsolvable if u.lam >= s.lam and u.mu >= s.mu]


@dataclass
class BlowupProfile:
    window: tuple[float, float]
    lambdas: list
    minima: list
    statuses: list

    @property
    def strictly_increasing(self) -> bool:
        m = self.minima
        return all(np.isfinite(m)) and all(b > a for a, b in zip(m, m[1:]))

    @property
    def growth_ratio(self) -> float:
        return self.minima[-1] / self.minima[0] if len(self.minima) >= 2 else float("nan")

    def to_dict(self) -> dict:
        return {"window": list(self.window), "lambda": list(self.lambdas), "window_min": list(self.minima),
                "status": list(self.statuses), "strictly_increasing": self.strictly_increasing,
                "growth_ratio": self.growth_ratio}


def blowup_profile(template: ProblemInstance, lam_sequence, mesh: Mesh, window=(0.25, 0.5),
                   op: DiscreteOperator | None = None) -> BlowupProfile:
    """Minimum of u_lambda over nodes with boundary distance in ``window``, along an increasing sequence."""
    lam_sequence = _check_grid(lam_sequence)
    d_lo, d_hi = window
    mask = (mesh.boundary_distance >= d_lo) & (mesh.boundary_distance <= d_hi)
    if lam_sequence.size and not np.any(mask):
        raise ValueError("window contains no nodes")
    minima, statuses = [], []
    for lam, rep in sweep(template, "lambda", lam_sequence, mesh, op=op):
        statuses.append(rep.status)
        minima.append(float(np.min(rep.solution[mask])) if rep.converged else float("nan"))
    return BlowupProfile((float(d_lo), float(d_hi)), [float(v) for v in lam_sequence], minima, statuses)


@dataclass
class FoldReport:
    lambdas: list
    counts: list
    lambda0_bracket: tuple[float, float]
    lambda1_bracket: tuple[float, float]
    centers: dict = field(default_factory=dict)

    def count_at(self, lam: float) -> int:
        return self.counts[self.lambdas.index(lam)]

    def to_dict(self) -> dict:
        return {"lambda": list(self.lambdas), "count": list(self.counts),
                "lambda0_bracket": list(self.lambda0_bracket), "lambda1_bracket": list(self.lambda1_bracket),
                "centers": {repr(k): v for k, v in sorted(self.centers.items())}}


FOLD_PATTERN = re.compile(r"^0*1?2+1*$")


class _Counter:
    def __init__(self, problem, centers, dimension):
        self.problem, self.centers, self.dimension = problem, centers, dimension
        self.cache: dict[float, list[float]] = {}

    def __call__(self, lam: float) -> int:
        lam = float(lam)
        if lam not in self.cache:
            sols = shoot_radial(self.problem, lam, self.centers, self.dimension)
            self.cache[lam] = [s.center for s in sols]
        return len(self.cache[lam])


def _pattern(counter: _Counter) -> str:
    return "".join(str(counter(v)) for v in sorted(counter.cache))


def _bisect_transition(counter: _Counter, lo: float, hi: float, below, rel_width: float) -> tuple[float, float]:
    # ``below(count)`` holds on the lo side; geometric midpoints suit log grids
    while hi - lo > rel_width * lo:
        mid = float(np.sqrt(lo * hi))
        if below(counter(mid)):
            lo = mid
        else:
            hi = mid
    return lo, hi


def fold_scan(problem: ProblemInstance, lam_grid, center_values=None, dimension: int = 1,
              rel_width: float = 0.01, max_refine: int = 12) -> FoldReport:
    """Solution counts along ``lam_grid`` and brackets of both fold points.

    A direct 0 -> 1 step on the grid means the two-solution window fell
    between grid points; that interval is subdivided until a count of 2 appears.
    """
    grid = _check_grid(lam_grid)
    if grid.size < 2:
        raise FoldNotResolved("need at least two lambda values")
    centers = default_center_grid() if center_values is None else np.asarray(center_values, dtype=float)
    counter = _Counter(problem, centers, dimension)
    for lam in grid:
        counter(lam)
    for _ in range(max_refine):
        lams = sorted(counter.cache)
        counts = [counter(v) for v in lams]
        if 2 in counts:
            break
        gaps = [(a, b) for a, b, ca, cb in zip(lams, lams[1:], counts, counts[1:]) if ca == 0 and cb >= 1]
        if not gaps:
            break
        a, b = gaps[0]
        for t in (0.25, 0.5, 0.75):
            counter(float(a * (b / a) ** t))
    if any(len(c) > 2 for c in counter.cache.values()) or not FOLD_PATTERN.match(_pattern(counter)):
        raise FoldNotResolved(f"count pattern {_pattern(counter)} is not a single fold")
    lams = sorted(counter.cache)
    counts = [counter(v) for v in lams]
    first_nonzero = next(i for i, c in enumerate(counts) if c > 0)
    if first_nonzero == 0:
        raise FoldNotResolved("grid starts inside the solvable range; lower the first lambda")
    last_two = max(i for i, c in enumerate(counts) if c == 2)
    if last_two == len(counts) - 1:
        raise FoldNotResolved("grid ends inside the two-solution window; raise the last lambda")
    b0 = _bisect_transition(counter, lams[first_nonzero - 1], lams[first_nonzero], lambda c: c == 0, rel_width)
    b1 = _bisect_transition(counter, lams[last_two], lams[last_two + 1], lambda c: c == 2, rel_width)
    if not FOLD_PATTERN.match(_pattern(counter)):
        raise FoldNotResolved(f"count pattern {_pattern(counter)} is not a single fold")
    lams = sorted(counter.cache)
    return FoldReport(lams, [counter(v) for v in lams], b0, b1, {v: counter.cache[v] for v in lams})


# -- emitters

SWEEP_COLUMNS = ["param", "status", "sup_norm", "h1_seminorm", "iterations"]
ATLAS_COLUMNS = ["lambda", "mu", "status", "verdict", "sup_norm", "h1_seminorm", "iterations"]


def fmt(value) -> str:
    """17 significant digits in scientific notation; strings pass through."""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return "%.16e" % float(value)


def write_csv(path_or_buffer, columns: list[str], rows: list[list]) -> None:
    own = isinstance(path_or_buffer, str) or hasattr(path_or_buffer, "__fspath__")
    fh = open(path_or_buffer, "w", newline="", encoding="utf-8") if own else path_or_buffer
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    finally:
        if own:
            fh.close()


def sweep_rows(results: list[tuple[float, SolveReport]]) -> list[list]:
    return [[v, r.status, r.sup_norm, r.h1_seminorm, r.iterations] for v, r in results]


def atlas_rows(cells: list[AtlasCell]) -> list[list]:
    return [[c.lam, c.mu, c.status, c.verdict, c.sup_norm, c.h1_seminorm, c.iterations] for c in cells]


def sweep_csv(results) -> str:
    buf = io.StringIO()
    write_csv(buf, SWEEP_COLUMNS, sweep_rows(results))
    return buf.getvalue()


def sweep_json(results, param: str) -> str:
    return json.dumps([{"param": param, "value": v, "report": r.to_dict()} for v, r in results], sort_keys=True)
