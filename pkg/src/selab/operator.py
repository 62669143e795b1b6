"""Discrete Dirichlet Laplacian on interval and radial meshes.

The operator acts on the non-Dirichlet nodes. Rows use the three-point
nonuniform stencil for -u''; on the ball the radial term -(N-1)/r u' is added
with the three-point nonuniform first derivative, and the centre row is the
symmetric form -2N (u_1 - u_0)/h^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import IterationLimit, SingularSystem
from .mesh import Mesh, quadrature_weights


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    mesh: Mesh
    lower: np.ndarray  # coefficient of u_{i-1} in row i (unknown rows)
    diag: np.ndarray
    upper: np.ndarray  # coefficient of u_{i+1}

    @property
    def size(self) -> int:
        return self.diag.size

    def matvec(self, u: np.ndarray) -> np.ndarray:
        """Apply to a vector of unknowns (homogeneous Dirichlet data)."""
        out = self.diag * u
        out[1:] += self.lower[1:] * u[:-1]
        out[:-1] += self.upper[:-1] * u[1:]
        return out

    def abs_matvec(self, u: np.ndarray) -> np.ndarray:
        """|A| |u|, the scale used for rounding-aware residual norms."""
        au = np.abs(u)
        out = np.abs(self.diag) * au
        out[1:] += np.abs(self.lower[1:]) * au[:-1]
        out[:-1] += np.abs(self.upper[:-1]) * au[1:]
        return out

    def apply(self, field: np.ndarray) -> np.ndarray:
        """Evaluate -Delta_h on a full nodal field, boundary values included.

        Dirichlet nodes get NaN in the output.
        """
        field = np.asarray(field, dtype=float)
        sl = self.mesh.unknown
        idx = np.arange(self.mesh.n)[sl]
        out = np.full(self.mesh.n, np.nan)
        centre = self.diag * field[idx]
        has_left = idx > 0
        left = np.where(has_left, field[np.maximum(idx - 1, 0)], 0.0)
        right = field[idx + 1]
        out[sl] = centre + self.lower * left + self.upper * right
        return out

    def dense(self) -> np.ndarray:
        m = self.size
        a = np.diag(self.diag)
        a[np.arange(1, m), np.arange(m - 1)] = self.lower[1:]
        a[np.arange(m - 1), np.arange(1, m)] = self.upper[:-1]
        return a


def derivative_weights(mesh: Mesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Three-point first-derivative weights at every interior node (1..n-2).

    Exact for quadratics on nonuniform grids; reduces to centred differences
    on uniform grids.
    """
    hm = mesh.spacing[:-1]
    hp = mesh.spacing[1:]
    wm = -hp / (hm * (hm + hp))
    w0 = (hp - hm) / (hm * hp)
    wp = hm / (hp * (hm + hp))
    return wm, w0, wp


def _bands(mesh: Mesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # rows of -Delta_h for the unknown nodes, boundary couplings included
    hm = mesh.spacing[:-1]
    hp = mesh.spacing[1:]
    lo = -2.0 / (hm * (hm + hp))
    di = 2.0 / (hm * hp)
    up = -2.0 / (hp * (hm + hp))
    if mesh.is_radial:
        n_dim = mesh.dimension
        r = mesh.nodes[1:-1]
        wm, w0, wp = derivative_weights(mesh)
        k = (n_dim - 1) / r
        lo = lo - k * wm
        di = di - k * w0
        up = up - k * wp
        h0 = mesh.spacing[0]
        lo = np.concatenate(([0.0], lo))
        di = np.concatenate(([2.0 * n_dim / h0**2], di))
        up = np.concatenate(([-2.0 * n_dim / h0**2], up))
    return lo, di, up


def assemble(mesh: Mesh) -> DiscreteOperator:
    lo, di, up = _bands(mesh)
    lo = lo.copy()
    up = up.copy()
    lo[0] = 0.0
    up[-1] = 0.0
    return DiscreteOperator(mesh, lo, di, up)


def laplacian(mesh: Mesh, field: np.ndarray) -> np.ndarray:
    """Delta_h applied to a field with arbitrary boundary values; NaN on Dirichlet nodes.

    Non-finite neighbours give NaN rather than an error, so fields singular at
    the boundary can be evaluated on the interior.
    """
    u = np.asarray(field, dtype=float)
    lo, di, up = _bands(mesh)
    sl = mesh.unknown
    idx = np.arange(mesh.n)[sl]
    out = np.full(mesh.n, np.nan)
    with np.errstate(invalid="ignore", over="ignore"):
        val = di * u[idx] + up * u[idx + 1]
        left = idx - 1
        has_left = left >= 0
        val[has_left] += lo[has_left] * u[left[has_left]]
    out[sl] = -val
    return out


def gradient_magnitude(mesh: Mesh, field: np.ndarray) -> np.ndarray:
    """|u'| at every node.

    Interior nodes use the three-point nonuniform derivative, Dirichlet
    endpoints a one-sided second-order formula, and the ball centre is 0.
    """
    u = np.asarray(field, dtype=float)
    h = mesh.spacing
    du = np.empty(mesh.n)
    wm, w0, wp = derivative_weights(mesh)
    du[1:-1] = wm * u[:-2] + w0 * u[1:-1] + wp * u[2:]
    du[0] = _one_sided(u[0], u[1], u[2], h[0], h[1])
    du[-1] = -_one_sided(u[-1], u[-2], u[-3], h[-1], h[-2])
    if mesh.is_radial:
        du[0] = 0.0
    return np.abs(du)


def _one_sided(u0, u1, u2, h1, h2):
    # derivative at x0 from nodes x0, x0+h1, x0+h1+h2; exact for quadratics
    s = h1 + h2
    return (-(2 * h1 + h2) / (h1 * s)) * u0 + (s / (h1 * h2)) * u1 - (h1 / (h2 * s)) * u2


def tridiagonal_solve(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a tridiagonal system with LAPACK gtsv; ``lower[0]``/``upper[-1]`` are ignored."""
    dl = np.array(lower[1:], dtype=float)
    d = np.array(diag, dtype=float)
    du = np.array(upper[:-1], dtype=float)
    b = np.array(rhs, dtype=float)
    _, _, _, x, info = lapack.dgtsv(dl, d, du, b, overwrite_dl=1, overwrite_d=1, overwrite_du=1, overwrite_b=1)
    if info != 0 or not np.all(np.isfinite(x)):
        raise SingularSystem(f"tridiagonal solve failed (info={info})")
    return x


def linear_solve(op: DiscreteOperator, rhs: np.ndarray) -> np.ndarray:
    """Solve -Delta_h u = rhs with homogeneous Dirichlet data.

    ``rhs`` is a full nodal field; values at Dirichlet nodes are ignored. The
    result is a full nodal field with exact zeros on the boundary.
    """
    sl = op.mesh.unknown
    u = np.zeros(op.mesh.n)
    u[sl] = tridiagonal_solve(op.lower, op.diag, op.upper, np.asarray(rhs, dtype=float)[sl])
    return u


@dataclass(frozen=True, eq=False)
class EigenPair:
    lambda1: float
    phi: np.ndarray  # full nodal field, sup-normalised, zero on the boundary
    iterations: int
    residual: float
    c1: float
    c2: float
    mesh: Mesh

    def to_dict(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "iterations": self.iterations,
            "residual": self.residual,
            "C1": self.c1,
            "C2": self.c2,
            "phi": self.phi.tolist(),
        }


def rayleigh_quotient(op: DiscreteOperator, u: np.ndarray) -> float:
    """Weighted Rayleigh quotient of a vector of unknowns."""
    w = quadrature_weights(op.mesh)[op.mesh.unknown]
    return float(np.dot(w * u, op.matvec(u)) / np.dot(w * u, u))


def principal_eigenpair(op: DiscreteOperator, tol: float = 1e-12, max_iter: int = 10_000) -> EigenPair:
    """Smallest eigenvalue and positive eigenvector by inverse iteration."""
    mesh = op.mesh
    x = np.ones(op.size)
    lam_old = rayleigh_quotient(op, x)
    best = np.inf
    for it in range(1, max_iter + 1):
        x = tridiagonal_solve(op.lower, op.diag, op.upper, x)
        x /= np.max(np.abs(x))
        lam = rayleigh_quotient(op, x)
        r = op.matvec(x) - lam * x
        res = float(np.max(np.abs(r)))
        # scaled by |A||x|: strongly graded meshes have an absolute rounding floor far above 1e-9
        scaled = float(np.max(np.abs(r) / (op.abs_matvec(x) + lam * np.abs(x))))
        if abs(lam - lam_old) <= tol * abs(lam):
            if res <= 1e-10 * lam or (scaled <= 1e-12 and scaled > 0.5 * best):
                break
        best = min(best, scaled)
        lam_old = lam
    else:
        raise IterationLimit(f"inverse iteration did not converge in {max_iter} steps")
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    phi = np.zeros(mesh.n)
    phi[mesh.unknown] = x
    d = mesh.boundary_distance[mesh.unknown]
    ratio = x / d
    return EigenPair(lam, phi, it, res, float(ratio.min()), float(ratio.max()), mesh)


def eigenpair(mesh: Mesh, tol: float = 1e-12) -> EigenPair:
    return principal_eigenpair(assemble(mesh), tol)
