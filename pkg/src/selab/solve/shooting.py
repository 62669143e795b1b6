"""Shooting for radial solutions of u'' + (N-1)/r u' + lambda (u^p - u^-alpha) = 0, u(1) = 0."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from ..problem import ProblemInstance

ROOT_TOL = 1e-10
ZERO_LEVEL = 1e-13
SCAN_RTOL = 1e-8
FINE_RTOL = 1e-11
# the series start sits this far from the centre when N > 1
R_START = 1e-6


def default_center_grid(lo: float = 1e-2, hi: float = 1e8, per_decade: int = 15) -> np.ndarray:
    return np.geomspace(lo, hi, int(round(per_decade * np.log10(hi / lo))) + 1)


@dataclass
class RadialSolution:
    center: float
    lam: float
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    mismatch: float

    @property
    def min_interior(self) -> float:
        return float(np.min(self.u[self.r < 1.0])) if np.any(self.r < 1.0) else float("nan")

    def to_dict(self) -> dict:
        return {"center": self.center, "lambda": self.lam, "mismatch": self.mismatch,
                "slope_at_boundary": float(self.du[-1]), "r": self.r.tolist(), "u": self.u.tolist()}


@dataclass
class Shot:
    center: float
    value: float
    hit: bool
    sol: object = field(default=None, repr=False)


class RadialShooter:
    """Shooting function Phi(c): u(1; c) when the profile stays positive on [0, 1],
    otherwise r0 - 1 with r0 < 1 the first zero."""

    def __init__(self, lam: float, p: float, alpha: float, dimension: int = 1):
        if not 0 < p < 1:
            raise ValueError("p must lie in (0, 1)")
        if not 0 < alpha < 1:
            raise ValueError("shooting requires alpha in (0, 1)")
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.lam, self.p, self.alpha, self.N = float(lam), float(p), float(alpha), int(dimension)

    def _rhs(self, r, y):
        u = y[0] if y[0] > 1e-300 else 1e-300
        acc = -self.lam * (u**self.p - u**-self.alpha)
        if self.N > 1:
            acc -= (self.N - 1) / r * y[1]
        return [y[1], acc]

    def _start(self, c: float):
        if self.N == 1:
            return 0.0, [c, 0.0]
        k = self.lam * (c**self.p - c**-self.alpha)
        r0 = R_START
        return r0, [c - k * r0 * r0 / (2 * self.N), -k * r0 / self.N]

    def shoot(self, c: float, rtol: float = FINE_RTOL, dense: bool = False) -> Shot:
        r0, y0 = self._start(c)

        def zero(r, y):
            return y[0] - ZERO_LEVEL * max(1.0, c)

        zero.terminal = True
        zero.direction = -1
        sol = solve_ivp(self._rhs, (r0, 1.0), y0, method="RK45", rtol=rtol, atol=rtol * 1e-2 * max(1.0, c),
                        events=zero, dense_output=dense)
        if sol.status == 1:
            return Shot(c, float(sol.t_events[0][0]) - 1.0, True, sol)
        return Shot(c, float(sol.y[0, -1]), False, sol)

    def phi(self, c: float, rtol: float = FINE_RTOL) -> float:
        return self.shoot(c, rtol).value

    def profile(self, c: float, points: int = 201) -> RadialSolution:
        shot = self.shoot(c, dense=True)
        r_end = 1.0 + shot.value if shot.hit else 1.0
        r = np.linspace(shot.sol.t[0], r_end, points)
        y = shot.sol.sol(r)
        if self.N > 1:
            r = np.concatenate(([0.0], r))
            y = np.concatenate(([[c], [0.0]], y), axis=1)
        return RadialSolution(float(c), self.lam, r, y[0], y[1], shot.value)


def _tangency_brackets(shooter: RadialShooter, grid, values, shallow: float = 0.05) -> list[tuple[float, float]]:
    """Root pairs hidden between grid points near a fold.

    Where Phi has a shallow positive local minimum on the grid, minimise it
    between the neighbouring grid points; a negative minimum splits the cell
    into two sign-change brackets.
    """
    out = []
    for i in range(1, len(grid) - 1):
        v = values[i]
        if not (0 < v < values[i - 1] and v < values[i + 1] and v < shallow * grid[i]):
            continue
        res = minimize_scalar(lambda c: shooter.phi(c, SCAN_RTOL), bounds=(grid[i - 1], grid[i + 1]),
                              method="bounded", options={"xatol": 1e-9 * grid[i], "maxiter": 60})
        if res.fun < 0:
            out += [(grid[i - 1], float(res.x)), (float(res.x), grid[i + 1])]
    return out


def _refine(shooter: RadialShooter, a: float, b: float, probe_steps: int = 12) -> float | None:
    """Root of Phi in [a, b], or None when the sign change is a jump.

    A few bisection steps come first: across a continuous root min|Phi| at
    the bracket ends shrinks with the bracket, across the jump it does not.
    """
    fa, fb = shooter.phi(a), shooter.phi(b)
    if fa * fb > 0:
        return None
    start = max(abs(fa), abs(fb))
    for _ in range(probe_steps):
        m = 0.5 * (a + b)
        fm = shooter.phi(m)
        if fm == 0.0:
            return m
        if fa * fm < 0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    if min(abs(fa), abs(fb)) > 1e-2 * start:
        return None
    return brentq(shooter.phi, a, b, xtol=1e-15 * b, rtol=4 * np.finfo(float).eps, maxiter=200)


def shoot_radial(problem: ProblemInstance, lam: float | None = None, center_values=None,
                 dimension: int = 1, tol: float = ROOT_TOL) -> list[RadialSolution]:
    """Distinct positive radial solutions found from sign changes of Phi over ``center_values``.

    A bracket is kept only if its refined root satisfies |Phi| < tol; brackets
    straddling the jump of Phi (profiles that graze zero) are discarded.
    """
    if problem.family != "radial_shi":
        raise ValueError("shoot_radial needs a radial_shi problem")
    lam = problem.lam if lam is None else float(lam)
    shooter = RadialShooter(lam, problem.f.p, problem.g.blowup_exponent, dimension)
    grid = default_center_grid() if center_values is None else np.asarray(center_values, dtype=float)
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("center values must be positive and increasing")
    values = np.array([shooter.phi(c, SCAN_RTOL) for c in grid])
    brackets = [(grid[i], grid[i + 1]) for i in np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) <= 0)]
    brackets += _tangency_brackets(shooter, grid, values)
    brackets.sort()
    found = []
    for a, b in brackets:
        root = _refine(shooter, a, b)
        if root is None:
            continue
        if abs(shooter.phi(root)) >= tol:
            continue
        if found and abs(root - found[-1].center) <= 1e-9 * root:
            continue
        found.append(shooter.profile(root))
    return found
