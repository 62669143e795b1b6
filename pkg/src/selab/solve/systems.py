"""Discrete nonlinear systems A u = RHS(u, |u'|) on the non-Dirichlet nodes.

A system knows its residual, a tridiagonal Jacobian and how to map its
unknown vector back to the physical solution u. Residual norms are scaled
node by node with ``1 + |A||x| + |RHS|`` so that strongly graded meshes are
judged above their rounding floor.
"""

from __future__ import annotations

import numpy as np

from ..mesh import Mesh
from ..operator import DiscreteOperator, assemble, derivative_weights
from ..problem import ProblemInstance, Terms

GRADIENT_SMOOTHING = 1e-8


class _Gradient:
    """Three-point derivative restricted to the unknown rows."""

    def __init__(self, mesh: Mesh):
        wm, w0, wp = derivative_weights(mesh)
        if mesh.is_radial:
            # centre row: symmetry, derivative zero
            wm, w0, wp = (np.concatenate(([0.0], w)) for w in (wm, w0, wp))
        self.wm, self.w0, self.wp = wm, w0, wp

    def __call__(self, x: np.ndarray) -> np.ndarray:
        d = self.w0 * x
        d[1:] += self.wm[1:] * x[:-1]
        d[:-1] += self.wp[:-1] * x[1:]
        return d


class DirectSystem:
    """The eps-regularised problem in the original unknown u."""

    def __init__(self, problem: ProblemInstance, mesh: Mesh, eps: float, op: DiscreteOperator | None = None,
                 extra_source: np.ndarray | None = None, lag_gradient: bool = False):
        self.problem = problem
        self.mesh = mesh
        self.eps = float(eps)
        self.op = op if op is not None else assemble(mesh)
        sl = mesh.unknown
        t: Terms = problem.terms(mesh)
        self.g, self.f = t.g, t.f
        self.g_coef = t.g_coef[sl]
        self.f_coef = t.f_coef[sl]
        self.grad_coef = t.grad_coef[sl]
        self.grad_exp = t.grad_exp
        self.source = t.source[sl].copy()
        if extra_source is not None:
            self.source += np.asarray(extra_source, dtype=float)[sl]
        self.singular_nodes = self.g_coef != 0.0
        self.has_g = bool(np.any(self.singular_nodes)) and self.g is not None
        self.has_f = bool(np.any(self.f_coef != 0.0)) and self.f is not None
        self.has_grad = bool(np.any(self.grad_coef != 0.0))
        self.grad = _Gradient(mesh) if self.has_grad else None
        self.lag_gradient = lag_gradient
        self._lagged = None

    # -- mapping between unknowns and u
    def to_u(self, x: np.ndarray) -> np.ndarray:
        return x

    def from_u(self, u: np.ndarray) -> np.ndarray:
        return np.array(u, dtype=float)

    def feasible(self, x: np.ndarray) -> bool:
        if not np.all(np.isfinite(x)):
            return False
        if self.has_g:
            return bool(np.all(x[self.singular_nodes] + self.eps > 0.0))
        return True

    def rhs(self, u: np.ndarray) -> np.ndarray:
        out = self.source.copy()
        if self.has_g:
            s = np.where(self.singular_nodes, u + self.eps, 1.0)
            out += np.where(self.singular_nodes, self.g_coef * self.g(s), 0.0)
        if self.has_f:
            out += self.f_coef * self.f(u)
        if self.has_grad:
            du = self.grad(self._lagged if (self.lag_gradient and self._lagged is not None) else u)
            out += self.grad_coef * (du * du + GRADIENT_SMOOTHING**2) ** (0.5 * self.grad_exp)
        return out

    def residual(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Residual and its per-node scale."""
        r = self.rhs(x)
        ax = self.op.matvec(x)
        return ax - r, 1.0 + self.op.abs_matvec(x) + np.abs(r)

    def jacobian(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        op = self.op
        lo, di, up = op.lower.copy(), op.diag.copy(), op.upper.copy()
        u = x
        if self.has_g:
            s = np.where(self.singular_nodes, u + self.eps, 1.0)
            di -= np.where(self.singular_nodes, self.g_coef * self.g.derivative(s), 0.0)
        if self.has_f:
            di -= self.f_coef * self.f.derivative(u)
        if self.has_grad and not self.lag_gradient:
            du = self.grad(u)
            p = self.grad_exp
            k = self.grad_coef * p * (du * du + GRADIENT_SMOOTHING**2) ** (0.5 * p - 1.0) * du
            lo -= k * self.grad.wm
            di -= k * self.grad.w0
            up -= k * self.grad.wp
        lo[0] = 0.0
        up[-1] = 0.0
        return lo, di, up

    def begin_picard(self, x: np.ndarray) -> None:
        self.lag_gradient = True
        self._lagged = x.copy()

    def update_lag(self, x: np.ndarray) -> None:
        if self.lag_gradient:
            self._lagged = x.copy()

    def rescale(self, x: np.ndarray) -> np.ndarray:
        return x


class ExpSystem:
    """Gradient-free form of -Lu = g(u) + lambda|u'|^2 + mu f(u).

    With v = (e^{lambda u} - 1)/lambda the equation becomes
    -Lv = (1 + lambda v)(g(u) + mu f(u)). Row i is divided by 1 + lambda v_i
    and written in the nodal values of u:

        sum_j A_ij e^{lambda(u_j - u_i)} q(u_j) = H(u_i),  q(u) = (1 - e^{-lambda u})/lambda,

    which is the same discrete system without ever forming e^{lambda u}, so
    solutions whose v overflows double precision stay representable.
    """

    def __init__(self, problem: ProblemInstance, mesh: Mesh, eps: float, op: DiscreteOperator | None = None):
        self.problem = problem
        self.mesh = mesh
        self.eps = float(eps)
        self.op = op if op is not None else assemble(mesh)
        self.lam = float(problem.lam)
        if not self.lam > 0:
            raise ValueError("exponential transform needs lambda > 0")
        sl = mesh.unknown
        t = problem.terms(mesh)
        self.g = t.g
        self.g_coef = t.g_coef[sl]
        self.f = t.f if problem.family != "ppart" else None
        self.f_coef = t.f_coef[sl]
        self.source = t.source[sl]
        self.lag_gradient = False

    def to_u(self, x: np.ndarray) -> np.ndarray:
        return x

    def from_u(self, u: np.ndarray) -> np.ndarray:
        return np.array(u, dtype=float)

    def feasible(self, x: np.ndarray) -> bool:
        return bool(np.all(np.isfinite(x)) and np.all(x + self.eps > 0.0))

    def _h(self, u):
        h = self.g_coef * self.g(u + self.eps) + self.source
        if self.f is not None:
            h = h + self.f_coef * self.f(u)
        return h

    def _dh(self, u):
        d = self.g_coef * self.g.derivative(u + self.eps)
        if self.f is not None:
            d = d + self.f_coef * self.f.derivative(u)
        return d

    def _parts(self, u):
        lam = self.lam
        q = -np.expm1(-lam * u) / lam
        em = np.zeros_like(u)
        ep = np.zeros_like(u)
        em[1:] = np.exp(lam * (u[:-1] - u[1:]))
        ep[:-1] = np.exp(lam * (u[1:] - u[:-1]))
        lo = self.op.lower * em
        up = self.op.upper * ep
        lo[0] = 0.0
        up[-1] = 0.0
        off = np.zeros_like(u)
        off[1:] += lo[1:] * q[:-1]
        off[:-1] += up[:-1] * q[1:]
        return q, lo, up, off

    def residual(self, u):
        q, lo, up, off = self._parts(u)
        h = self._h(u)
        diag_term = self.op.diag * q
        scale = 1.0 + np.abs(diag_term) + np.abs(off) + np.abs(h)
        return diag_term + off - h, scale

    def jacobian(self, u):
        q, lo, up, off = self._parts(u)
        di = self.op.diag * np.exp(-self.lam * u) - self.lam * off - self._dh(u)
        return lo, di, up

    def begin_picard(self, u):
        pass

    def update_lag(self, u):
        pass

    def rescale(self, u):
        return u
