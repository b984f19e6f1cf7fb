"""P1 finite element assembly for the coupled memory system.

Dirichlet conditions are imposed by eliminating boundary rows and columns,
so every returned matrix acts on interior DOFs only (unless ``full=True``).

The semi-discrete linear system in the state ``Y = (y, z)`` reads::

    E Y' = A Y + B u,   E = diag(M, M),
    A = [[-eta L - beta*gamma M, -kappa L],
         [ M,                    -lam M  ]],

with the second row coming from ``z' + lam z - y = 0``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import FULL_DOMAIN, nodes_in_region
from .params import ModelParams

__all__ = [
    "ModelParams",
    "OperatorBlocks",
    "triangle_rule",
    "element_geometry",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_coupled",
    "assemble_nonlinear",
    "EmptyControlRegionError",
    "NonFiniteError",
]


class EmptyControlRegionError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


# Symmetric 7-point rule of degree 5 in barycentric coordinates; weights sum to 1.
_S15 = np.sqrt(15.0)
_A1, _A2 = (6 - _S15) / 21, (6 + _S15) / 21
_W1, _W2 = (155 - _S15) / 1200, (155 + _S15) / 1200
_RULE5 = (
    np.array([
        [1 / 3, 1 / 3, 1 / 3],
        [_A1, _A1, 1 - 2 * _A1], [_A1, 1 - 2 * _A1, _A1], [1 - 2 * _A1, _A1, _A1],
        [_A2, _A2, 1 - 2 * _A2], [_A2, 1 - 2 * _A2, _A2], [1 - 2 * _A2, _A2, _A2],
    ]),
    np.array([9 / 40, _W1, _W1, _W1, _W2, _W2, _W2]),
)


def triangle_rule(degree):
    """Quadrature on a triangle exact for polynomials of total ``degree``.

    Returns barycentric points, shape (nq, 3), and weights normalized to sum
    to one (multiply by the element area). Degrees up to 5 use the 7-point
    symmetric rule; higher degrees use a collapsed Gauss-Legendre product.
    """
    if degree <= 5:
        return _RULE5
    q = -(-degree // 2) + 1  # Gauss exactness 2q-1 >= degree+1 in the collapsed direction
    x, w = np.polynomial.legendre.leggauss(q)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    xi = u.ravel()
    eta = (v * (1.0 - u)).ravel()
    weights = 2.0 * (wu * wv * (1.0 - u)).ravel()
    bary = np.column_stack([1.0 - xi - eta, xi, eta])
    return bary, weights


def element_geometry(mesh):
    """Element areas, shape (T,), and barycentric gradients, shape (T, 3, 2)."""
    p = mesh.nodes[mesh.triangles]
    area = mesh.signed_areas()
    grads = np.empty((len(area), 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        grads[:, i, 0] = p[:, j, 1] - p[:, k, 1]
        grads[:, i, 1] = p[:, k, 0] - p[:, j, 0]
    grads /= (2.0 * area)[:, None, None]
    return area, grads


def _scatter(mesh, local, full):
    """Sum element matrices of shape (T, 3, 3) into a sparse matrix."""
    tri = mesh.triangles
    if full:
        rows = np.repeat(tri, 3, axis=1).ravel()
        cols = np.tile(tri, (1, 3)).ravel()
        data = local.ravel()
        size = mesh.n_nodes
    else:
        loc = mesh.interior_index[tri]
        rows = np.repeat(loc, 3, axis=1).ravel()
        cols = np.tile(loc, (1, 3)).ravel()
        keep = (rows >= 0) & (cols >= 0)
        rows, cols, data = rows[keep], cols[keep], local.ravel()[keep]
        size = mesh.n_interior
    return sp.coo_matrix((data, (rows, cols)), shape=(size, size)).tocsr()


def _symmetrize(mat):
    return ((mat + mat.T) * 0.5).tocsr()


_MASS_REF = (np.ones((3, 3)) + np.eye(3)) / 12.0


def assemble_mass(mesh, full=False):
    """Consistent mass matrix ``int phi_i phi_j``."""
    area, _ = element_geometry(mesh)
    local = area[:, None, None] * _MASS_REF
    return _symmetrize(_scatter(mesh, local, full))


def assemble_stiffness(mesh, full=False):
    """Stiffness matrix ``int grad phi_i . grad phi_j``."""
    area, grads = element_geometry(mesh)
    local = area[:, None, None] * np.einsum("tik,tjk->tij", grads, grads)
    return _symmetrize(_scatter(mesh, local, full))


@dataclass(frozen=True, eq=False)
class OperatorBlocks:
    """Sparse matrices of the semi-discrete coupled system.

    ``B`` maps control coefficients (hat functions at the interior nodes of
    the control box) to the load of the ``y`` equation; ``R`` is the Gram
    matrix of that control basis.
    """

    mesh: object
    params: ModelParams
    M: sp.csr_matrix
    L: sp.csr_matrix
    E: sp.csr_matrix
    A: sp.csr_matrix
    Anu: sp.csr_matrix
    B: sp.csr_matrix
    R: sp.csr_matrix
    control_dofs: np.ndarray

    @property
    def N(self):
        return self.M.shape[0]

    @property
    def dim(self):
        return 2 * self.N

    @property
    def m(self):
        return len(self.control_dofs)


def assemble_coupled(mesh, params, region=FULL_DOMAIN):
    """Assemble ``E``, ``A``, ``A + nu E``, ``B`` and ``R`` on the interior DOFs."""
    M = assemble_mass(mesh)
    L = assemble_stiffness(mesh)
    ctrl = nodes_in_region(mesh, region)
    if len(ctrl) == 0:
        raise EmptyControlRegionError(f"empty control region: no interior node inside {tuple(region)}")
    p = params
    E = sp.block_diag([M, M], format="csr")
    A = sp.bmat([
        [-p.eta * L - p.beta_gamma * M, -p.kappa * L],
        [M, -p.lam * M],
    ], format="csr")
    Anu = (A + p.nu * E).tocsr()
    Mc = M[:, ctrl]
    B = sp.vstack([Mc, sp.csr_matrix(Mc.shape)], format="csr")
    R = M[ctrl][:, ctrl].tocsr()
    return OperatorBlocks(mesh, params, M, L, E, A, Anu, B, R, ctrl)


def assemble_nonlinear(mesh, params, y, jacobian=True, degree=None):
    """Residual and Jacobian of the advection and reaction terms.

    The residual is::

        r_i = int [alpha y^d (dy/dx1 + dy/dx2) + beta y^(2d+1) - beta (1+gamma) y^(d+1)] phi_i

    with ``y`` the P1 interpolant of the interior coefficients (zero on the
    boundary) and ``d = params.delta``. The integral uses a triangle rule of
    degree ``2d + 2`` (or ``degree``); the Jacobian is the exact derivative of
    that quadrature sum.

    Returns
    -------
    r : ndarray, shape (N,)
    J : scipy.sparse.csr_matrix or None
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (mesh.n_interior,):
        raise ValueError(f"expected {mesh.n_interior} interior coefficients, got shape {y.shape}")
    d = params.delta
    a, b, g = params.alpha, params.beta, params.gamma
    bary, w = triangle_rule(2 * d + 2 if degree is None else degree)
    area, grads = element_geometry(mesh)

    loc = mesh.interior_index[mesh.triangles]
    ye = np.where(loc >= 0, y[np.maximum(loc, 0)], 0.0)
    dsum = grads.sum(axis=2)  # d/dx1 + d/dx2 of each barycentric function
    gsum = np.einsum("ti,ti->t", ye, dsum)
    yq = ye @ bary.T  # (T, nq)

    with np.errstate(over="raise", invalid="raise"):
        try:
            yd = yq ** d
            f = a * yd * gsum[:, None]
            f = f + b * yq ** (2 * d + 1) - b * (1 + g) * yq ** (d + 1)
        except FloatingPointError as exc:
            raise NonFiniteError("non-finite value in nonlinear term evaluation") from exc
    wa = area[:, None] * w[None, :]
    local_r = (f * wa) @ bary
    inner = loc >= 0
    r = np.bincount(loc[inner], weights=local_r[inner], minlength=mesh.n_interior)
    if not np.all(np.isfinite(r)):
        raise NonFiniteError("non-finite nonlinear residual")
    if not jacobian:
        return r, None

    ydm1 = yq ** (d - 1) if d > 1 else np.ones_like(yq)
    c = a * d * ydm1 * gsum[:, None] + b * (2 * d + 1) * yq ** (2 * d) - b * (1 + g) * (d + 1) * yd
    local_j = np.einsum("tq,qi,qj->tij", c * wa, bary, bary)
    local_j += np.einsum("tq,qi,tj->tij", a * yd * wa, bary, dsum)
    rows = np.repeat(loc, 3, axis=1).ravel()
    cols = np.tile(loc, (1, 3)).ravel()
    keep = (rows >= 0) & (cols >= 0)
    N = mesh.n_interior
    J = sp.coo_matrix((local_j.ravel()[keep], (rows[keep], cols[keep])), shape=(N, N)).tocsr()
    return r, J
