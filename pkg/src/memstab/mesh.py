"""Structured P1 triangulation of the unit square.

Nodes are numbered row-major (y outer, x inner); every grid cell is cut
along its lower-left to upper-right diagonal. Only interior nodes carry
degrees of freedom (homogeneous Dirichlet data on the whole boundary).
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["Mesh", "build_unit_square_mesh", "nodes_in_region", "FULL_DOMAIN"]

FULL_DOMAIN = (0.0, 1.0, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangulation of (0,1)^2.

    Attributes
    ----------
    n : int
        Subdivisions per side.
    nodes : ndarray, shape (n_nodes, 2)
    triangles : ndarray, shape (n_tri, 3)
        Counterclockwise vertex indices.
    boundary_mask : ndarray of bool, shape (n_nodes,)
    interior_index : ndarray of int, shape (n_nodes,)
        DOF number of each node, -1 on the boundary.
    """

    n: int
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_mask: np.ndarray
    interior_index: np.ndarray

    @property
    def h(self):
        return 1.0 / self.n

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @property
    def n_interior(self):
        return int(np.count_nonzero(~self.boundary_mask))

    @property
    def interior_nodes(self):
        """Node index of each interior DOF, in DOF order."""
        return np.flatnonzero(~self.boundary_mask)

    def signed_areas(self):
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def interpolate(self, func):
        """Nodal values of ``func(x1, x2)`` at the interior DOFs."""
        xy = self.nodes[self.interior_nodes]
        return np.asarray(func(xy[:, 0], xy[:, 1]), dtype=float) * np.ones(len(xy))

    def to_full(self, values):
        """Scatter interior DOF values onto all nodes (zero on the boundary)."""
        full = np.zeros(self.n_nodes)
        full[self.interior_nodes] = values
        return full

    def info(self):
        return {
            "n": self.n,
            "nodes": self.n_nodes,
            "triangles": self.n_triangles,
            "interior": self.n_interior,
            "h": self.h,
        }


def build_unit_square_mesh(n):
    """Build the structured mesh with ``n`` cells per side."""
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"mesh subdivision count must be a positive integer, got {n!r}")
    n = int(n)
    h = 1.0 / n
    ticks = np.arange(n + 1) * h
    ticks[-1] = 1.0
    xx, yy = np.meshgrid(ticks, ticks)  # row-major: y outer
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    a = (j * (n + 1) + i).ravel()
    b = a + 1
    c = a + n + 2
    d = a + n + 1
    lower = np.column_stack([a, b, c])
    upper = np.column_stack([a, c, d])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    ij = np.column_stack([np.tile(np.arange(n + 1), n + 1), np.repeat(np.arange(n + 1), n + 1)])
    boundary = np.any((ij == 0) | (ij == n), axis=1)
    interior_index = np.full(len(nodes), -1, dtype=np.int64)
    interior_index[~boundary] = np.arange(np.count_nonzero(~boundary))

    for arr in (nodes, triangles, boundary, interior_index):
        arr.setflags(write=False)
    return Mesh(n, nodes, triangles, boundary, interior_index)


def _check_box(region):
    try:
        a1, b1, a2, b2 = (float(v) for v in region)
    except (TypeError, ValueError):
        raise ValueError(f"region must be four numbers (a1, b1, a2, b2), got {region!r}") from None
    if not (0.0 <= a1 < b1 <= 1.0 and 0.0 <= a2 < b2 <= 1.0):
        raise ValueError(f"malformed region box {region!r}; need 0 <= a < b <= 1 on both axes")
    return a1, b1, a2, b2


def nodes_in_region(mesh, region):
    """Interior DOF indices whose nodes lie in the closed box ``[a1,b1]x[a2,b2]``.

    ``region`` is given as ``(a1, b1, a2, b2)``. An empty result is returned
    when no interior node falls inside.
    """
    a1, b1, a2, b2 = _check_box(region)
    tol = 1e-12
    xy = mesh.nodes[mesh.interior_nodes]
    inside = (
        (xy[:, 0] >= a1 - tol) & (xy[:, 0] <= b1 + tol)
        & (xy[:, 1] >= a2 - tol) & (xy[:, 1] <= b2 + tol)
    )
    return np.flatnonzero(inside)
