"""Dense linear-algebra kernels: SPD factorization, eigenvalues, Lyapunov equations."""

import os

import numpy as np
import scipy.linalg as sl
import scipy.sparse as sp
from scipy.linalg import lapack

__all__ = [
    "FactorizationError",
    "SingularSylvesterError",
    "IterationLimitError",
    "DenseLimitError",
    "SPDFactor",
    "spd_factor",
    "dense_eig",
    "spectral_abscissa",
    "lyapunov_solve",
    "dense_limit",
    "check_dense_limit",
]

DEFAULT_DENSE_LIMIT = 4000


class FactorizationError(np.linalg.LinAlgError):
    def __init__(self, pivot, message=None):
        self.pivot = pivot
        super().__init__(message or f"matrix is not positive definite: Cholesky failed at pivot {pivot}")


class SingularSylvesterError(np.linalg.LinAlgError):
    pass


class IterationLimitError(np.linalg.LinAlgError):
    pass


class DenseLimitError(ValueError):
    pass


def dense_limit():
    """Largest dimension allowed for dense kernels (env ``MEMSTAB_DENSE_LIMIT``)."""
    return int(os.environ.get("MEMSTAB_DENSE_LIMIT", DEFAULT_DENSE_LIMIT))


def check_dense_limit(dim, limit=None):
    limit = dense_limit() if limit is None else limit
    if dim > limit:
        raise DenseLimitError(
            f"dense limit exceeded: dimension {dim} > {limit} (set MEMSTAB_DENSE_LIMIT to override)"
        )


def _dense(a):
    if sp.issparse(a):
        return a.toarray()
    return np.asarray(a, dtype=float)


class SPDFactor:
    """Cholesky factor of a symmetric positive definite matrix.

    Immutable after construction; ``solve`` accepts vectors or matrices.
    """

    def __init__(self, matrix):
        a = _dense(matrix)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix has non-finite entries")
        c, info = lapack.dpotrf(a, lower=False, clean=True)
        if info > 0:
            raise FactorizationError(info)
        if info < 0:
            raise ValueError(f"illegal argument {-info} to dpotrf")
        self._c = c
        self._c.setflags(write=False)
        self.shape = a.shape

    def solve(self, rhs):
        rhs = _dense(rhs)
        return sl.cho_solve((self._c, False), rhs)


def spd_factor(matrix):
    return SPDFactor(matrix)


def dense_eig(matrix, b=None, vectors=False):
    """All eigenvalues (and optionally right eigenvectors) of ``matrix``.

    With ``b`` the generalized problem ``matrix v = mu b v`` is solved.
    Eigenvalues are returned sorted by descending real part, then by
    descending imaginary part.
    """
    a = _dense(matrix)
    bb = None if b is None else _dense(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    try:
        out = sl.eig(a, bb, right=vectors)
    except np.linalg.LinAlgError as exc:
        raise IterationLimitError(f"eigenvalue iteration did not converge: {exc}") from exc
    w, v = (out, None) if not vectors else out
    order = np.lexsort((-w.imag, -w.real))
    w = w[order]
    if vectors:
        return w, v[:, order]
    return w


def spectral_abscissa(matrix, b=None):
    return float(np.max(dense_eig(matrix, b).real))


def _quasi_triangular_eigs(t):
    """Eigenvalues read off the 1x1 and 2x2 diagonal blocks of a real Schur form."""
    n = t.shape[0]
    out = []
    i = 0
    while i < n:
        if i + 1 < n and t[i + 1, i] != 0.0:
            blk = t[i:i + 2, i:i + 2]
            tr = 0.5 * (blk[0, 0] + blk[1, 1])
            det = blk[0, 0] * blk[1, 1] - blk[0, 1] * blk[1, 0]
            disc = np.sqrt(complex(tr * tr - det))
            out += [tr + disc, tr - disc]
            i += 2
        else:
            out.append(complex(t[i, i]))
            i += 1
    return np.array(out)


def lyapunov_solve(F, Q, rtol=1e-12):
    """Solve ``F^T X + X F + Q = 0`` by the Bartels-Stewart method.

    ``F`` is reduced to real Schur form ``U T U^T`` and the transformed
    equation ``T^T Y + Y T = -U^T Q U`` is solved by quasi-triangular
    back-substitution.

    Raises
    ------
    SingularSylvesterError
        If two eigenvalues of ``F`` sum to (numerically) zero.
    """
    F = _dense(F)
    Q = _dense(Q)
    n = F.shape[0]
    if F.shape != (n, n) or Q.shape != (n, n):
        raise ValueError(f"shape mismatch: F {F.shape}, Q {Q.shape}")
    T, U = sl.schur(F, output="real")
    ev = _quasi_triangular_eigs(T)
    gap = np.min(np.abs(ev[:, None] + ev[None, :]))
    scale = max(np.max(np.abs(ev)), np.finfo(float).tiny)
    if gap <= rtol * scale:
        raise SingularSylvesterError(
            f"singular Sylvester operator: eigenvalue pair of F sums to {gap:.3e}"
        )
    C = -(U.T @ Q @ U)
    Y, s, info = lapack.dtrsyl(T, T, C, trana="T", tranb="N", isgn=1)
    if info < 0:
        raise ValueError(f"illegal argument {-info} to dtrsyl")
    if info == 1:
        raise SingularSylvesterError("singular Sylvester operator: close eigenvalues perturbed")
    X = U @ (Y / s) @ U.T
    if np.allclose(Q, Q.T, rtol=0, atol=1e-14 * max(1.0, np.max(np.abs(Q)))):
        X = 0.5 * (X + X.T)
    return X
