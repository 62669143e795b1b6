"""Quantitative checks on computed solutions: decay rates, linear bounds, H^1 membership,
integrability of phi1^-s, the reciprocal identity and the energy bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import WindowTooSparse
from .mesh import Mesh, build_mesh, cell_midpoint_weights
from .operator import EigenPair, eigenpair, gradient_magnitude, laplacian
from .problem import GSpec, ProblemInstance

# -- boundary decay rate

SYMMETRY_TOL = 0.05
MIN_WINDOW_NODES = 10


@dataclass
class RateFit:
    sigma: float
    constant: float
    window: tuple[float, float]
    fit_residual: float
    node_count: int
    other_side_sigma: float = float("nan")

    @property
    def asymmetry(self) -> float:
        return abs(self.sigma - self.other_side_sigma) if np.isfinite(self.other_side_sigma) else 0.0

    @property
    def symmetric(self) -> bool:
        return self.asymmetry <= SYMMETRY_TOL

    def to_dict(self) -> dict:
        return {"sigma": self.sigma, "constant": self.constant, "window": list(self.window),
                "fit_residual": self.fit_residual, "node_count": self.node_count,
                "other_side_sigma": self.other_side_sigma, "asymmetry": self.asymmetry,
                "symmetric": self.symmetric}


def default_rate_window(mesh: Mesh) -> tuple[float, float]:
    return 2.0 * mesh.first_cell, 0.1


def _loglog_fit(d: np.ndarray, u: np.ndarray) -> tuple[float, float, float]:
    x, y = np.log(d), np.log(u)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    rms = float(np.sqrt(np.mean((A @ np.array([slope, icpt]) - y) ** 2)))
    return float(slope), float(math.exp(icpt)), rms


def fit_boundary_rate(mesh: Mesh, values: np.ndarray, window: tuple[float, float] | None = None) -> RateFit:
    """Least-squares fit of log u against log d over the nodes with d in ``window``.

    On the interval the fit uses the side next to x = 0 and the other side is
    fitted as well to report the asymmetry.
    """
    window = default_rate_window(mesh) if window is None else (float(window[0]), float(window[1]))
    d_lo, d_hi = window
    if not 0 < d_lo < d_hi <= 0.5 * float(np.max(mesh.boundary_distance)) + 1e-15:
        raise ValueError("window must satisfy 0 < d_min < d_max <= max(d)/2")
    u = np.asarray(values, dtype=float)
    d = mesh.boundary_distance
    inside = (d >= d_lo) & (d <= d_hi) & (u > 0)
    if mesh.is_radial:
        sides = [inside]
    else:
        left = mesh.nodes <= 0.5
        sides = [inside & left, inside & ~left]
    primary = sides[0]
    if np.count_nonzero(primary) < MIN_WINDOW_NODES:
        raise WindowTooSparse(f"{np.count_nonzero(primary)} nodes in window {window}")
    sigma, const, rms = _loglog_fit(d[primary], u[primary])
    other = float("nan")
    if len(sides) > 1 and np.count_nonzero(sides[1]) >= MIN_WINDOW_NODES:
        other = _loglog_fit(d[sides[1]], u[sides[1]])[0]
    return RateFit(sigma, const, window, rms, int(np.count_nonzero(primary)), other)


# -- linear bounds c1 d <= u <= c2 d

BOUND_FLOOR = 1e-10


@dataclass
class LinearBounds:
    c1: float
    c2: float

    @property
    def ratio(self) -> float:
        return self.c2 / self.c1 if self.c1 > 0 else math.inf

    @property
    def violated(self) -> bool:
        return not self.c1 > BOUND_FLOOR

    @property
    def status(self) -> str:
        return "BoundViolation" if self.violated else "Bounded"

    def to_dict(self) -> dict:
        return {"status": self.status, "c1": self.c1, "c2": self.c2, "ratio": self.ratio}


def linear_bounds_check(mesh: Mesh, values: np.ndarray) -> LinearBounds:
    """c1 = min u/d and c2 = max u/d over the interior nodes (the ball centre included)."""
    u = np.asarray(values, dtype=float)
    interior = ~mesh.dirichlet
    q = u[interior] / mesh.boundary_distance[interior]
    return LinearBounds(float(np.min(q)), float(np.max(q)))


# -- Dirichlet energy and H^1 membership

def dirichlet_energy(mesh: Mesh, values: np.ndarray) -> float:
    """Sum over cells of |cell| (du/h)^2, the form consistent with summation by parts."""
    du = np.diff(np.asarray(values, dtype=float)) / mesh.spacing
    return float(np.dot(cell_midpoint_weights(mesh), du * du))


MEMBER = "Member"
NON_MEMBER = "NonMember"
INCONCLUSIVE = "Inconclusive"
MEMBER_SLOPE = 0.1
NON_MEMBER_SLOPE = 0.15


@dataclass
class MembershipVerdict:
    verdict: str
    seminorm_sequence: list
    loglog_slope: float
    node_counts: list
    first_cells: list
    step_slopes: list = field(default_factory=list)
    laplacian_l1: list = field(default_factory=list)
    statuses: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "energy_sequence": list(self.seminorm_sequence),
                "loglog_slope": self.loglog_slope, "step_slopes": list(self.step_slopes),
                "node_counts": list(self.node_counts), "first_cells": list(self.first_cells),
                "laplacian_l1": list(self.laplacian_l1), "statuses": list(self.statuses)}


def membership_from_energies(energies, first_cells) -> tuple[str, float, list]:
    """Verdict from the slope of log(energy) against log(1/first cell)."""
    x = -np.log(np.asarray(first_cells, dtype=float))
    y = np.log(np.asarray(energies, dtype=float))
    slope = float(np.polyfit(x, y, 1)[0])
    steps = [float(v) for v in np.diff(y) / np.diff(x)]
    if abs(slope) < MEMBER_SLOPE:
        verdict = MEMBER
    elif slope > NON_MEMBER_SLOPE:
        verdict = NON_MEMBER
    else:
        verdict = INCONCLUSIVE
    return verdict, slope, steps


def expected_membership(beta: float, gamma: float) -> str:
    """Verdict the weighted-convection family predicts for weight d^beta and g(s) = s^-gamma.

    Member when beta >= max(0, gamma - 3), NonMember when 2 beta <= gamma - 3.
    Both conditions hold at beta = 0, gamma = 3 (where u ~ d^(1/2) and the
    energy diverges logarithmically); that point and the gap between the two
    regions are Inconclusive.
    """
    member = beta >= max(0.0, gamma - 3.0)
    non_member = 2.0 * beta <= gamma - 3.0
    if member and not non_member:
        return MEMBER
    if non_member and not member:
        return NON_MEMBER
    return INCONCLUSIVE


def h1_membership(problem: ProblemInstance, meshes: list[Mesh], solver=None) -> MembershipVerdict:
    """Dirichlet energy of the computed solution on each mesh and its growth under refinement.

    The slope is taken against log(1/first cell), which makes it independent
    of the grading: an integrand d^{-k} near the boundary, k > 1, gives slope k - 1.
    """
    if len(meshes) < 3:
        raise ValueError("need at least three meshes")
    if solver is None:
        from .continuation import solve_problem as solver
    energies, cells, counts, l1, statuses = [], [], [], [], []
    for mesh in meshes:
        rep = solver(problem, mesh)
        statuses.append(rep.status)
        if not rep.converged:
            from .errors import SelabError

            raise SelabError(f"solve failed on n={mesh.n}: {rep.status} ({rep.reason})")
        energies.append(dirichlet_energy(mesh, rep.solution))
        cells.append(mesh.first_cell)
        counts.append(mesh.n)
        lap = laplacian(mesh, rep.solution)
        l1.append(float(np.nansum(np.abs(lap) * mesh.quadrature_weights())))
    verdict, slope, steps = membership_from_energies(energies, cells)
    return MembershipVerdict(verdict, energies, slope, counts, cells, steps, l1, statuses)


# -- Lazer-McKenna integrability of phi1^-s

FINITE = "Finite"
DIVERGENT = "Divergent"
STABLE_CHANGE = 1e-3
GROWTH = 0.10


@dataclass
class IntegrabilityVerdict:
    verdict: str
    s: float
    values: list
    node_counts: list
    relative_changes: list

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "s": self.s, "values": list(self.values),
                "node_counts": list(self.node_counts), "relative_changes": list(self.relative_changes)}


def negative_power_integral(mesh: Mesh, phi: np.ndarray, s: float) -> float:
    """Integral of phi^-s with phi replaced by its piecewise-linear interpolant.

    Each cell is integrated exactly. A cell where the interpolant vanishes at
    one end has an infinite integral once s >= 1; such cells are dropped, so
    the value is then a truncated integral that grows under refinement.
    """
    phi = np.asarray(phi, dtype=float)
    a, b = phi[:-1], phi[1:]
    h = cell_midpoint_weights(mesh)
    if s == 0:
        return float(np.sum(h))
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    keep = (lo > 0) | (s < 1)
    lo, hi, h = lo[keep], hi[keep], h[keep]
    diff = hi - lo
    close = diff <= 1e-9 * hi
    with np.errstate(divide="ignore", invalid="ignore"):
        if s == 1:
            exact = (np.log(hi) - np.log(lo)) / diff
        else:
            exact = (hi ** (1 - s) - lo ** (1 - s)) / ((1 - s) * diff)
        mid = (0.5 * (lo + hi)) ** -s
    return float(np.sum(h * np.where(close, mid, exact)))


def lazer_mckenna_check(pair: EigenPair, s: float, refinement_levels: int = 4) -> IntegrabilityVerdict:
    """phi1^-s integrated on the eigenpair's mesh and on successive doublings of it.

    Finite when the last relative change is below 1e-3, Divergent when the
    last refinement grows the value by more than 10%, Inconclusive otherwise.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    if refinement_levels < 3:
        raise ValueError("need at least three refinement levels")
    base = pair.mesh
    values, counts = [], []
    for level in range(refinement_levels):
        if level == 0:
            mesh, phi = base, pair.phi
        else:
            mesh = build_mesh(base.geometry, (base.n - 1) * 2**level + 1, base.grading_exponent, base.dimension)
            phi = eigenpair(mesh).phi
        values.append(negative_power_integral(mesh, phi, s))
        counts.append(mesh.n)
    changes = [float((b - a) / abs(a)) for a, b in zip(values, values[1:])]
    if abs(changes[-1]) < STABLE_CHANGE:
        verdict = FINITE
    elif changes[-1] > GROWTH:
        verdict = DIVERGENT
    else:
        verdict = INCONCLUSIVE
    return IntegrabilityVerdict(verdict, float(s), values, counts, changes)


# -- reciprocal transform identity

@dataclass
class ReciprocalResidual:
    r2: np.ndarray
    identity: np.ndarray
    min_distance: float

    @property
    def sup(self) -> float:
        vals = self.identity[np.isfinite(self.identity)]
        return float(np.max(np.abs(vals))) if vals.size else float("nan")

    def to_dict(self) -> dict:
        return {"sup_identity_residual": self.sup, "min_distance": self.min_distance}


def reciprocal_residual(mesh: Mesh, u: np.ndarray, p: float, min_distance: float = 0.0) -> ReciprocalResidual:
    """r2 = Delta_h v + v^{2-p} - (2/v)|grad_h v|^2 for v = 1/u, and r2 + u^-2 (Delta_h u - u^p).

    The second field vanishes for the continuous operators; discretely it is
    a consistency error. Nodes with d <= min_distance or a non-finite stencil are NaN.
    """
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        v = 1.0 / u
        gv = gradient_magnitude(mesh, v)
        r2 = laplacian(mesh, v) + v ** (2.0 - p) - (2.0 / v) * gv * gv
        ident = r2 + u**-2.0 * (laplacian(mesh, u) - u**p)
    mask = (mesh.boundary_distance > min_distance) & np.isfinite(ident) & np.isfinite(r2)
    r2 = np.where(mask, r2, np.nan)
    ident = np.where(mask, ident, np.nan)
    return ReciprocalResidual(r2, ident, float(min_distance))


def convergence_orders(errors) -> list[float]:
    e = np.asarray(errors, dtype=float)
    return [float(v) for v in np.log2(e[:-1] / e[1:])]


# -- energy bound

@dataclass(frozen=True)
class EnergyBoundParams:
    """Majorants f(t) <= A t + B and g(t) <= C t^-alpha + D."""

    A: float
    B: float
    C: float
    D: float
    alpha: float

    @classmethod
    def from_problem(cls, problem: ProblemInstance) -> "EnergyBoundParams":
        A, B = problem.f.linear_majorant()
        C, D, alpha = g_majorant(problem.g)
        return cls(float(A), float(B), float(C), float(D), float(alpha))

    def verify(self, f, g, samples: int = 2000) -> bool:
        t = np.geomspace(1e-12, 1e6, samples)
        ok_f = np.all(f(t) <= self.A * t + self.B + 1e-12 * (1 + self.A * t + self.B))
        bound_g = self.C * t**-self.alpha + self.D
        ok_g = np.all(g(t) <= bound_g * (1 + 1e-12))
        return bool(ok_f and ok_g)

    def to_dict(self) -> dict:
        return {"A": self.A, "B": self.B, "C": self.C, "D": self.D, "alpha": self.alpha}


def g_majorant(g: GSpec) -> tuple[float, float, float]:
    """(C, D, alpha) with g(t) <= C t^-alpha + D for all t > 0."""
    if g.form == "power":
        return 1.0, 0.0, g.theta
    if g.form == "power_plus_constant":
        return 1.0, g.a_inf, g.theta
    # -log t <= 1/(e alpha) t^-alpha, alpha = 1/2
    return 2.0 / math.e, 0.0, 0.5


@dataclass
class EnergyBound:
    holds: bool
    energy: float
    bound: float
    l2_norm: float
    lam_ratio: float = float("nan")

    @property
    def margin(self) -> float:
        return self.bound - self.energy

    @property
    def status(self) -> str:
        return "Holds" if self.holds else "Violated"

    def to_dict(self) -> dict:
        return {"status": self.status, "energy": self.energy, "bound": self.bound, "margin": self.margin,
                "l2_norm": self.l2_norm, "lam_over_lambda1": self.lam_ratio}


def energy_bound_check(mesh: Mesh, solution: np.ndarray, params: EnergyBoundParams, lam: float,
                       a_sup: float = 1.0, eigenpair: EigenPair | None = None) -> EnergyBound:
    """Check int|u'|^2 <= lam A |u|^2 + |a| C |u|^{1-alpha} |Omega|^{(1+alpha)/2} + (lam B + |a| D) |u| |Omega|^{1/2}."""
    u = np.asarray(solution, dtype=float)
    energy = dirichlet_energy(mesh, u)
    l2 = math.sqrt(mesh.integrate(u * u))
    vol = mesh.volume
    al = params.alpha
    bound = (lam * params.A * l2 * l2
             + a_sup * params.C * l2 ** (1 - al) * vol ** ((1 + al) / 2)
             + (lam * params.B + a_sup * params.D) * l2 * math.sqrt(vol))
    ratio = lam / eigenpair.lambda1 if eigenpair is not None else float("nan")
    return EnergyBound(energy <= bound, energy, bound, l2, ratio)
