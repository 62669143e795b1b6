"""Sub/supersolution (shifted Picard) iteration."""

from __future__ import annotations

import numpy as np

from ..errors import OrderViolation
from ..mesh import Mesh
from ..operator import DiscreteOperator, EigenPair, assemble, eigenpair, linear_solve, tridiagonal_solve
from ..problem import ProblemInstance
from .newton import h1_seminorm
from .report import CONVERGED, STALLED, SolveReport
from .systems import DirectSystem

MAX_ITER = 200_000
TOL = 1e-10
ORDER_SLACK = 1e-12


def _system(problem: ProblemInstance, mesh: Mesh, op: DiscreteOperator) -> DirectSystem:
    # eps = 0: the singular factor is evaluated at u itself
    sys_ = DirectSystem(problem, mesh, 0.0, op=op)
    sys_.eps = 0.0
    return sys_


def residual_sign(problem: ProblemInstance, mesh: Mesh, w: np.ndarray, op: DiscreteOperator | None = None) -> np.ndarray:
    """A w - RHS(w) on the unknown nodes (<= 0 for a subsolution, >= 0 for a supersolution)."""
    op = op if op is not None else assemble(mesh)
    x = np.asarray(w, dtype=float)[mesh.unknown]
    with np.errstate(divide="ignore", invalid="ignore"):
        F, _ = _system(problem, mesh, op).residual(x)
    return F


def _shift(system: DirectSystem, lo: np.ndarray, hi: np.ndarray, samples: int = 9) -> np.ndarray:
    """Nodal sigma_i >= max(0, -d RHS/du) over [lo_i, hi_i].

    The derivative of the singular part is unbounded near 0, so one scalar
    shift for the whole mesh would be infinite; a nodal shift stays finite
    wherever the subsolution is positive.
    """
    lo = np.maximum(lo, 1e-300)
    hi = np.maximum(hi, lo)
    t = np.linspace(0.0, 1.0, samples)
    sigma = np.zeros_like(lo)
    for s in t:
        u = lo * (hi / lo) ** s if np.all(lo > 0) else lo + s * (hi - lo)
        u = np.where(np.isfinite(u), u, lo + s * (hi - lo))
        d = np.zeros_like(u)
        if system.has_g:
            d += np.where(system.singular_nodes, system.g_coef * system.g.derivative(np.maximum(u, 1e-300)), 0.0)
        if system.has_f:
            d += system.f_coef * system.f.derivative(u)
        sigma = np.maximum(sigma, -d)
    return 1.05 * sigma


def monotone_iterate(problem: ProblemInstance, mesh: Mesh, sub: np.ndarray, sup: np.ndarray,
                     tol: float = TOL, max_iter: int = MAX_ITER, op: DiscreteOperator | None = None) -> SolveReport:
    """u_{k+1} = (A + diag(sigma))^{-1} (RHS(u_k) + sigma u_k), started from ``sub``.

    Raises OrderViolation when an iterate leaves [sub, sup] or decreases.
    """
    op = op if op is not None else assemble(mesh)
    sl = mesh.unknown
    lo = np.asarray(sub, dtype=float)[sl]
    hi = np.asarray(sup, dtype=float)[sl]
    if np.any(lo > hi + ORDER_SLACK):
        raise OrderViolation("subsolution lies above the supersolution")
    system = _system(problem, mesh, op)
    if system.has_grad:
        raise ValueError("monotone iteration is implemented for gradient-free families")
    if system.has_g and np.any(lo[system.singular_nodes] <= 0):
        raise OrderViolation("subsolution must be positive where the singular term acts")
    sigma = _shift(system, lo, hi)
    diag = op.diag + sigma
    u = lo.copy()
    diff = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        new = tridiagonal_solve(op.lower, diag, op.upper, system.rhs(u) + sigma * u)
        slack = ORDER_SLACK * (1.0 + np.abs(new))
        if np.any(new < lo - slack) or np.any(new > hi + slack):
            raise OrderViolation(f"iterate {it} left the order interval")
        if np.any(new < u - slack):
            raise OrderViolation(f"iterate {it} is not monotone")
        diff = float(np.max(np.abs(new - u)))
        u = new
        if diff < tol:
            break
    full = np.zeros(mesh.n)
    full[sl] = u
    F, scale = system.residual(u)
    status = CONVERGED if diff < tol else STALLED
    rep = SolveReport(status, solution=full if status == CONVERGED else None, iterations=it,
                      final_residual=float(np.max(np.abs(F) / scale)), sup_norm=float(np.max(np.abs(full))),
                      h1_seminorm=h1_seminorm(mesh, full), min_interior_value=float(np.min(u)),
                      reason="" if status == CONVERGED else "iteration limit")
    rep.meta["solver"] = "monotone"
    rep.meta["last_difference"] = diff
    rep.meta["sub_residual_max"] = float(np.max(residual_sign(problem, mesh, sub, op)))
    rep.meta["super_residual_min"] = float(np.min(residual_sign(problem, mesh, sup, op)))
    return rep


def subsolution_seed(problem: ProblemInstance, mesh: Mesh, pair: EigenPair | None = None,
                     op: DiscreteOperator | None = None) -> np.ndarray:
    """Largest c in 1, 0.1, ..., 1e-8 making c*phi1^tau a discrete subsolution, tau = 2/(1+theta)."""
    op = op if op is not None else assemble(mesh)
    pair = pair if pair is not None else eigenpair(mesh)
    theta = problem.g.blowup_exponent
    tau = 2.0 / (1.0 + theta) if theta > 0 else 1.0
    base = np.maximum(pair.phi, 0.0) ** tau
    for k in range(0, 9):
        w = 10.0 ** -k * base
        if np.all(residual_sign(problem, mesh, w, op) <= 0):
            return w
    raise OrderViolation("no subsolution of the form c*phi1^tau found")


def supersolution_seed(problem: ProblemInstance, mesh: Mesh, op: DiscreteOperator | None = None) -> np.ndarray:
    """Smallest M in 1, 10, ..., 1e8 making M * torsion a discrete supersolution."""
    op = op if op is not None else assemble(mesh)
    torsion = linear_solve(op, np.ones(mesh.n))
    for k in range(0, 9):
        w = 10.0**k * torsion
        if np.all(residual_sign(problem, mesh, w, op) >= 0):
            return w
    raise OrderViolation("no supersolution of the form M*torsion found")
