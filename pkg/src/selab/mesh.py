"""One-dimensional meshes on the unit interval and on the radial coordinate of the unit ball.

Graded meshes cluster nodes toward the Dirichlet boundary through the map
``d = t**grading`` applied to the boundary distance. Spacings are computed from
the boundary distance rather than from node differences so that cells of size
far below machine epsilon (relative to 1) stay exact near ``x = 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError

INTERVAL = "interval"
RADIAL = "radial"


@dataclass(frozen=True, eq=False)
class Mesh:
    geometry: str
    nodes: np.ndarray
    spacing: np.ndarray
    boundary_distance: np.ndarray
    grading_exponent: float = 1.0
    dimension: int = 1
    _weights: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def is_radial(self) -> bool:
        return self.geometry == RADIAL

    @property
    def dirichlet(self) -> np.ndarray:
        """Boolean mask of Dirichlet boundary nodes."""
        mask = np.zeros(self.n, dtype=bool)
        mask[-1] = True
        if not self.is_radial:
            mask[0] = True
        return mask

    @property
    def unknown(self) -> slice:
        """Slice of the nodes carrying unknowns (all non-Dirichlet nodes)."""
        return slice(0, self.n - 1) if self.is_radial else slice(1, self.n - 1)

    @property
    def first_cell(self) -> float:
        """Width of the smallest cell touching the Dirichlet boundary."""
        if self.is_radial:
            return float(self.spacing[-1])
        return float(min(self.spacing[0], self.spacing[-1]))

    @property
    def volume(self) -> float:
        if not self.is_radial:
            return 1.0
        return unit_ball_volume(self.dimension)

    def quadrature_weights(self) -> np.ndarray:
        return quadrature_weights(self)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(quadrature_weights(self), values))

    def to_dict(self) -> dict:
        return {
            "geometry": self.geometry,
            "dimension": self.dimension,
            "grading_exponent": self.grading_exponent,
            "n": self.n,
            "nodes": self.nodes.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "Mesh":
        return build_mesh(
            data["geometry"], int(data["n"]), float(data.get("grading_exponent", 1.0)),
            dimension=int(data.get("dimension", 1)),
        )


def sphere_area(dimension: int) -> float:
    """Surface measure of the unit sphere in R^N (2 for N = 1)."""
    return 2.0 * math.pi ** (dimension / 2.0) / math.gamma(dimension / 2.0)


def unit_ball_volume(dimension: int) -> float:
    return sphere_area(dimension) / dimension


def build_mesh(geometry: str, n: int, grading_exponent: float = 1.0, dimension: int = 1) -> Mesh:
    """Build an interval or radial mesh with ``n`` nodes.

    On the interval the grading map is applied symmetrically from both
    endpoints; on the ball it is applied from ``r = 1`` only and the centre is a
    symmetry node.
    """
    if n < 8:
        raise MeshError(f"need at least 8 nodes, got {n}")
    if not grading_exponent >= 1.0:
        raise MeshError(f"grading exponent must be >= 1, got {grading_exponent}")
    g = float(grading_exponent)
    t = np.linspace(0.0, 1.0, n)

    if geometry == INTERVAL:
        left = t <= 0.5
        s = np.where(left, 2.0 * t, 2.0 * (1.0 - t))
        d = 0.5 * s**g
        d[0] = d[-1] = 0.0
        x = np.where(left, d, 1.0 - d)
        x[0], x[-1] = 0.0, 1.0
        # spacing from distances: exact near both ends
        dl, dr = d[:-1], d[1:]
        ll, rl = left[:-1], left[1:]
        h = np.where(ll & rl, dr - dl, np.where(~ll & ~rl, dl - dr, 1.0 - dl - dr))
        dimension = 1
    elif geometry == RADIAL:
        if dimension < 1:
            raise MeshError("ball dimension must be >= 1")
        d = (1.0 - t) ** g
        d[-1] = 0.0
        x = 1.0 - d
        x[0], x[-1] = 0.0, 1.0
        h = d[:-1] - d[1:]
    else:
        raise MeshError(f"unknown geometry {geometry!r}")

    if np.any(h <= 0.0):
        raise MeshError("grading too strong for the requested node count")
    for arr in (x, h, d):
        arr.setflags(write=False)
    return Mesh(geometry, x, h, d, g, dimension)


def quadrature_weights(mesh: Mesh) -> np.ndarray:
    """Trapezoidal weights; on the ball they carry the factor |S^{N-1}| r^{N-1}."""
    if mesh._weights is not None:
        return mesh._weights
    h = mesh.spacing
    w = np.zeros(mesh.n)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    if mesh.is_radial:
        w = w * sphere_area(mesh.dimension) * mesh.nodes ** (mesh.dimension - 1)
    w.setflags(write=False)
    object.__setattr__(mesh, "_weights", w)
    return w


def cell_midpoint_weights(mesh: Mesh) -> np.ndarray:
    """Measure of each cell, used for cell-wise (edge) integrands such as |u'|^2."""
    h = mesh.spacing
    if not mesh.is_radial:
        return h.copy()
    rm = 0.5 * (mesh.nodes[:-1] + mesh.nodes[1:])
    return h * sphere_area(mesh.dimension) * rm ** (mesh.dimension - 1)
