"""Damped Newton on eps-regularised problems and eps -> 0 continuation."""

from __future__ import annotations

import logging
import math

import numpy as np

from ..errors import SingularSystem
from ..mesh import Mesh, cell_midpoint_weights
from ..operator import DiscreteOperator, assemble, linear_solve, tridiagonal_solve
from ..problem import ProblemInstance, g_integral_divergent
from .report import CONVERGED, DIVERGED, NO_SOLUTION, STALLED, SolveReport
from .systems import DirectSystem, ExpSystem

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
NORM_CAP = 1e6
MAX_NEWTON = 200
MAX_HALVINGS = 30
ARMIJO = 1e-4
CAUCHY_TOL = 1e-6
EPS_START, EPS_STOP = 0.1, 1e-8
# no merit improvement by this factor over STAGNATION_WINDOW steps ends the run early
STAGNATION_WINDOW = 25
STAGNATION_FACTOR = 0.5


def epsilon_schedule(start: float = EPS_START, stop: float = EPS_STOP) -> list[float]:
    """eps_k = start * 2^-k for every eps_k >= stop."""
    out = []
    eps = start
    while eps >= stop:
        out.append(eps)
        eps *= 0.5
    return out


def h1_seminorm(mesh: Mesh, u: np.ndarray) -> float:
    du = np.diff(u) / mesh.spacing
    return float(np.sqrt(np.dot(cell_midpoint_weights(mesh), du * du)))


def _merit(F: np.ndarray, scale: np.ndarray) -> float:
    return float(np.max(np.abs(F) / scale)) if F.size else 0.0


def newton_solve(system, x0: np.ndarray, max_iter: int = MAX_NEWTON, tol: float = RESIDUAL_TOL,
                 norm_cap: float = NORM_CAP) -> tuple[str, np.ndarray, int, float, str]:
    """Damped Newton with Armijo backtracking on the scaled residual sup-norm.

    Returns (status, x, iterations, merit, reason). The gradient term is lagged
    (Picard) after three consecutive failed line searches.
    """
    x = np.array(x0, dtype=float)
    if not system.feasible(x):
        return STALLED, x, 0, math.inf, "infeasible initial guess"
    F, scale = system.residual(x)
    merit = _merit(F, scale)
    history = [merit]
    failures = 0
    picard = False
    for it in range(1, max_iter + 1):
        if merit <= tol:
            return CONVERGED, x, it - 1, merit, ""
        lo, di, up = system.jacobian(x)
        try:
            dx = tridiagonal_solve(lo, di, up, -F)
        except SingularSystem:
            return STALLED, x, it, merit, "singular Jacobian"
        # Armijo on the residual under the scale frozen at x (a scale that grows
        # with the trial would reward steps that increase |F|), or the natural
        # monotonicity test on the simplified Newton correction, which accepts
        # the full steps of a locally quadratic phase whose residual spikes
        t = 1.0
        best = None
        accepted = False
        dx_norm = float(np.max(np.abs(dx))) if dx.size else 0.0
        for _ in range(MAX_HALVINGS + 1):
            trial = x + t * dx
            if system.feasible(trial):
                Ft, st = system.residual(trial)
                frozen = _merit(Ft, scale)
                if frozen <= (1.0 - ARMIJO * t) * merit:
                    accepted = True
                    break
                try:
                    bar = tridiagonal_solve(lo, di, up, -Ft)
                    if float(np.max(np.abs(bar))) <= (1.0 - 0.25 * t) * dx_norm:
                        accepted = True
                        break
                except SingularSystem:
                    pass
                if best is None or frozen < best[0]:
                    best = (frozen, trial, Ft, st)
            t *= 0.5
        if accepted:
            failures = 0
            x, F, scale = trial, Ft, st
        else:
            failures += 1
            if best is None:
                return STALLED, x, it, merit, "no feasible step"
            _, x, F, scale = best
            if failures >= 3:
                if picard or system.lag_gradient or getattr(system, "grad", None) is None:
                    return STALLED, x, it, merit, "line search failed repeatedly"
                picard = True
                failures = 0
                system.begin_picard(x)
        merit = _merit(F, scale)
        if picard:
            system.update_lag(x)
            F, scale = system.residual(x)
            merit = _merit(F, scale)
        x2 = system.rescale(x)
        if x2 is not x:
            x = x2
            F, scale = system.residual(x)
            merit = _merit(F, scale)
        unorm = float(np.max(np.abs(system.to_u(x)))) if x.size else 0.0
        if not math.isfinite(unorm) or unorm > norm_cap:
            return DIVERGED, x, it, merit, f"norm cap exceeded ({unorm:.3g})"
        # rounding floor: a full Newton step that no longer moves x
        if accepted and t == 1.0 and float(np.max(np.abs(dx))) <= 1e-14 * (1.0 + float(np.max(np.abs(x)))):
            return CONVERGED, x, it, merit, "step below rounding floor"
        history.append(merit)
        if len(history) > STAGNATION_WINDOW and merit > STAGNATION_FACTOR * history[-STAGNATION_WINDOW - 1]:
            return STALLED, x, it, merit, "no progress"
    if merit <= tol:
        return CONVERGED, x, max_iter, merit, ""
    return STALLED, x, max_iter, merit, "iteration limit"


def _report(status, mesh: Mesh, u_unknown, iterations, merit, reason, eps_used) -> SolveReport:
    u = np.zeros(mesh.n)
    u[mesh.unknown] = u_unknown
    rep = SolveReport(status, iterations=iterations, final_residual=merit, reason=reason,
                      epsilon_schedule_used=list(eps_used))
    if np.all(np.isfinite(u)):
        rep.sup_norm = float(np.max(np.abs(u)))
        rep.min_interior_value = float(np.min(u[mesh.unknown]))
        rep.h1_seminorm = h1_seminorm(mesh, u)
    if status == CONVERGED:
        rep.solution = u
    return rep


def solve_regularized(problem: ProblemInstance, mesh: Mesh, eps: float, init: np.ndarray | None = None,
                      op: DiscreteOperator | None = None, extra_source: np.ndarray | None = None) -> SolveReport:
    """Newton solve of the problem with every singular factor evaluated at u + eps."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    system = DirectSystem(problem, mesh, eps, op=op, extra_source=extra_source)
    x0 = np.zeros(mesh.n)[mesh.unknown] if init is None else np.asarray(init, dtype=float)[mesh.unknown]
    status, x, its, merit, reason = newton_solve(system, x0)
    return _report(status, mesh, x, its, merit, reason, [eps])


def has_negative_singular_part(problem: ProblemInstance, mesh: Mesh) -> bool:
    return bool(np.any(problem.terms(mesh).g_coef[mesh.unknown] < 0))


def supersolution_seed(problem: ProblemInstance, mesh: Mesh, op: DiscreteOperator | None = None) -> np.ndarray:
    """Solution of the problem with its negative singular part dropped.

    It dominates every solution of the full problem and seeds Newton toward
    the maximal solution.
    """
    op = op if op is not None else assemble(mesh)
    torsion = linear_solve(op, np.ones(mesh.n))
    seed = (1.0 + problem.lam + problem.mu) ** 2 * torsion
    t = problem.terms(mesh)
    clipped = np.maximum(t.g_coef, 0.0)
    if not np.any(clipped[mesh.unknown] > 0):
        sys_ = DirectSystem(problem, mesh, 1.0, op=op)
        sys_.g_coef = np.zeros_like(sys_.g_coef)
        sys_.singular_nodes = np.zeros_like(sys_.singular_nodes)
        sys_.has_g = False
        status, x, *_ = newton_solve(sys_, seed[mesh.unknown])
        if status == CONVERGED and np.all(x > 0):
            out = np.zeros(mesh.n)
            out[mesh.unknown] = x
            return out
    return seed


def _cold_seed(problem: ProblemInstance, mesh: Mesh, op: DiscreteOperator) -> np.ndarray:
    # u = 0 is a poor start when f(s) = s^p, p < 1: f' is unbounded there and the
    # first linearisation is indefinite, so start from the torsion function
    t = problem.terms(mesh)
    f = t.f
    if f is not None and f.form == "power" and f.p < 1 and np.any(t.f_coef[mesh.unknown] != 0):
        return linear_solve(op, np.ones(mesh.n))
    return np.zeros(mesh.n)


RAMP_MIN_STEP = 1e-4


def _ramp(make_system, eps: float, x0: np.ndarray, norm_cap: float):
    """Reach lambda from a smaller value when a cold start fails.

    Solutions grow with lambda, so each accepted solution seeds the next.
    Returns (status, x, iterations, merit, reason, reached_fraction).
    """
    its = 0
    start = None
    frac = 0.5
    while frac >= 1.0 / 64:
        system = make_system(eps, frac)
        status, x, k, merit, reason = newton_solve(system, x0, norm_cap=norm_cap)
        its += k
        if status == CONVERGED:
            start = (frac, x)
            break
        frac *= 0.5
    if start is None:
        return status, x0, its, merit, reason, 0.0
    frac, x = start
    step = min(0.25, 1.0 - frac)
    while frac < 1.0:
        target = min(1.0, frac + step)
        system = make_system(eps, target)
        status, xt, k, merit, reason = newton_solve(system, x, norm_cap=norm_cap)
        its += k
        if status == CONVERGED:
            frac, x = target, xt
            step *= 1.5
        elif status == DIVERGED:
            return DIVERGED, x, its, merit, f"norm cap exceeded on the way (fraction {target:.6g})", frac
        else:
            step *= 0.5
            if step < RAMP_MIN_STEP:
                return STALLED, x, its, merit, f"parameter ramp stuck at fraction {frac:.6g}", frac
    return CONVERGED, x, its, merit, "", 1.0


def _continuation(make_system, mesh: Mesh, x0: np.ndarray, schedule, norm_cap: float) -> SolveReport:
    """Run the eps schedule, warm-starting each stage from the previous one.

    ``make_system(eps, frac)`` builds the system with lambda scaled by frac.
    """
    good: list[tuple[float, np.ndarray, float]] = []  # (eps, u, sup)
    eps_used = []
    total_its = 0
    last = None
    ramp_frac = None
    for eps in schedule:
        system = make_system(eps, 1.0)
        start = system.from_u(good[-1][1]) if good else x0
        status, xs, its, merit, reason = newton_solve(system, start, norm_cap=norm_cap)
        total_its += its
        eps_used.append(eps)
        if status != CONVERGED and not good:
            status, xs, its, merit, reason, ramp_frac = _ramp(make_system, eps, x0, norm_cap)
            total_its += its
        last = (status, merit, reason)
        if status == CONVERGED:
            u = system.to_u(xs)
            good.append((eps, u, float(np.max(np.abs(u)))))
            continue
        if good:
            sups = [s for _, _, s in good]
            growing = len(sups) >= 2 and all(b > a for a, b in zip(sups, sups[1:]))
            u = good[-1][1]
            if status == DIVERGED and growing:
                rep = _report(NO_SOLUTION, mesh, u, total_its, merit, "eps-branch norms grow until divergence",
                              eps_used)
            else:
                rep = _report(status, mesh, u, total_its, merit, f"failed at eps={eps:.3g}: {reason}", eps_used)
            rep.meta["deepest_eps"] = good[-1][0]
            rep.meta["sup_norms"] = sups
            return rep
        rep = _report(NO_SOLUTION, mesh, np.full(x0.size, np.nan), total_its, merit,
                      f"first eps-branch failed ({status}: {reason})", eps_used)
        rep.meta["branch_status"] = status
        if ramp_frac is not None:
            rep.meta["ramp_fraction_reached"] = ramp_frac
        return rep

    eps, u, sup = good[-1]
    sups = [s for _, _, s in good]
    merit = last[1]
    cauchy = math.inf
    if len(good) >= 2:
        cauchy = float(np.max(np.abs(good[-1][1] - good[-2][1])))
    if cauchy >= CAUCHY_TOL * max(1.0, sup):
        growing = len(sups) >= 2 and all(b > a for a, b in zip(sups, sups[1:]))
        status = NO_SOLUTION if growing else STALLED
        rep = _report(status, mesh, u, total_its, merit, "eps-solutions not Cauchy", eps_used)
    elif float(np.min(u)) <= 0.0:
        rep = _report(NO_SOLUTION, mesh, u, total_its, merit, "limit not positive in the interior", eps_used)
    else:
        rep = _report(CONVERGED, mesh, u, total_its, merit, "", eps_used)
    rep.meta["cauchy_difference"] = cauchy
    rep.meta["sup_norms"] = sups
    rep.meta["deepest_eps"] = eps
    if ramp_frac is not None:
        rep.meta["ramp_fraction_reached"] = ramp_frac
    return rep


def _scaled(problem: ProblemInstance, frac: float) -> ProblemInstance:
    return problem if frac == 1.0 else problem.with_param("lambda", problem.lam * frac)


def solve_singular(problem: ProblemInstance, mesh: Mesh, init: np.ndarray | None = None,
                   schedule: list[float] | None = None, op: DiscreteOperator | None = None,
                   norm_cap: float = NORM_CAP) -> SolveReport:
    """Solve the singular problem by eps -> 0 continuation of regularised Newton solves.

    Problems whose singular term enters with a negative sign are always seeded
    with the supersolution obtained by dropping that term (maximal branch).
    """
    op = op if op is not None else assemble(mesh)
    schedule = epsilon_schedule() if schedule is None else list(schedule)
    if has_negative_singular_part(problem, mesh):
        seed = supersolution_seed(problem, mesh, op)
        if init is not None:
            seed = np.maximum(seed, init)
    elif init is None:
        seed = _cold_seed(problem, mesh, op)
    else:
        seed = np.asarray(init, dtype=float)
    x0 = seed[mesh.unknown]
    rep = _continuation(lambda eps, frac: DirectSystem(_scaled(problem, frac), mesh, eps, op=op),
                        mesh, x0, schedule, norm_cap)
    rep.meta["solver"] = "newton"
    if problem.family == "plamu" and has_negative_singular_part(problem, mesh) and g_integral_divergent(problem.g):
        return _nonintegrable_absorption(rep, mesh)
    return rep


def _nonintegrable_absorption(rep: SolveReport, mesh: Mesh) -> SolveReport:
    # Absorption by a non-integrable g rules out classical solutions whatever the
    # parameters; the discrete system is still solvable, so its outcome is kept
    # as metadata next to the criterion that decides the verdict.
    meta = dict(rep.meta)
    meta["trigger"] = "g_integral_divergent"
    meta["g_integral_divergent"] = True
    meta["discrete_status"] = rep.status
    if rep.converged:
        meta["discrete_sup_norm"] = rep.sup_norm
        meta["discrete_boundary_slope"] = float(rep.solution[1] / mesh.spacing[0])
    return SolveReport(NO_SOLUTION, None, rep.iterations, rep.final_residual, math.nan, math.nan,
                       rep.epsilon_schedule_used, math.nan,
                       "integral of g near 0 diverges under absorption: no classical solution", meta)


def exp_transform_solve(problem: ProblemInstance, mesh: Mesh, init: np.ndarray | None = None,
                        schedule: list[float] | None = None, op: DiscreteOperator | None = None,
                        norm_cap: float = NORM_CAP) -> SolveReport:
    """Solve a quadratic-gradient problem through v = (e^{lambda u} - 1)/lambda.

    The transformed problem has no gradient term; the returned solution is the
    back-transformed u, with the residual of the original discrete equation
    stored in ``meta['original_residual']``.
    """
    if problem.family not in ("ppart", "convection") or problem.grad_exponent != 2.0:
        raise ValueError("exponential transform needs a gradient exponent of 2")
    if not problem.lam > 0:
        raise ValueError("exponential transform needs lambda > 0")
    op = op if op is not None else assemble(mesh)
    schedule = epsilon_schedule() if schedule is None else list(schedule)
    u0 = np.zeros(mesh.n) if init is None else np.asarray(init, dtype=float)
    rep = _continuation(lambda eps, frac: ExpSystem(_scaled(problem, frac), mesh, eps, op=op),
                        mesh, u0[mesh.unknown], schedule, norm_cap)
    rep.meta["solver"] = "exp_transform"
    if rep.solution is not None:
        direct = DirectSystem(problem, mesh, rep.meta.get("deepest_eps", EPS_STOP), op=op)
        F, scale = direct.residual(rep.solution[mesh.unknown])
        rep.meta["original_residual"] = _merit(F, scale)
        rep.meta["original_residual_abs"] = float(np.max(np.abs(F)))
    return rep
