"""Riccati feedback synthesis for the semi-discrete shifted system.

The generalized system ``E Y' = (A + nu E) Y + B u`` with cost
``int Y^T E Y + u^T R u dt`` is reduced to standard form with
``At = E^-1 (A + nu E)``, ``Bt = E^-1 B``, ``Q = E``, and the equation::

    At^T P + P At - P Bt R^-1 Bt^T P + Q = 0

is solved by Newton-Kleinman. The feedback is ``u = -G Y`` with
``G = R^-1 B^T E^-1 P``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sl

from .numkit import check_dense_limit, dense_eig, lyapunov_solve, spd_factor, _dense

__all__ = [
    "RiccatiError",
    "InitializationError",
    "NonConvergenceError",
    "RiccatiSolution",
    "reduce_to_standard",
    "stabilizing_initial_gain",
    "newton_kleinman",
    "are_residual",
    "solve_feedback",
]

log = logging.getLogger(__name__)


class RiccatiError(RuntimeError):
    pass


class InitializationError(RiccatiError):
    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class NonConvergenceError(RiccatiError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = list(history)


@dataclass
class RiccatiSolution:
    """Stabilizing solution of the reduced Riccati equation.

    ``G`` is the gain in the original coordinates, feedback ``u = -G Y``.
    ``residual`` is the relative Frobenius residual recomputed from ``P``.
    """

    P: np.ndarray
    G: np.ndarray
    residual: float
    closed_loop_abscissa: float
    iterations: int
    history: list = field(default_factory=list)

    def summary(self):
        return {
            "residual": self.residual,
            "iterations": self.iterations,
            "closed_loop_abscissa": self.closed_loop_abscissa,
        }


def reduce_to_standard(blocks, limit=None):
    """Dense ``(At, Bt, Q, R)`` for the reduced equation."""
    check_dense_limit(blocks.dim, limit)
    fac = spd_factor(blocks.E)
    At = fac.solve(blocks.Anu.toarray())
    Bt = fac.solve(blocks.B.toarray())
    return At, Bt, blocks.E.toarray(), blocks.R.toarray()


def _abscissa(F):
    ev = dense_eig(F)
    i = int(np.argmax(ev.real))
    return float(ev[i].real), ev[i]


def stabilizing_initial_gain(At, Bt, sigma=None, margin=1.0, rcond=1e-12):
    """Gain ``G0`` with ``At - Bt G0`` stable, by the Bass shift.

    The shift acts on the unstable invariant subspace only. With the ordered
    real Schur form ``At^T = V S V^T`` (eigenvalues with ``Re >= 0`` leading,
    ``k`` of them), ``Ak = S[:k, :k]^T`` and ``Bk = V[:, :k]^T Bt``, ``Z``
    solves ``(Ak + sigma I) Z + Z (Ak + sigma I)^T = 2 Bk Bk^T`` and
    ``G0 = Bk^T Z^+ V[:, :k]^T``. The closed loop is block triangular in
    ``V``, so the stable eigenvalues are left in place. ``sigma`` must exceed
    the spectral abscissa; a stable ``At`` short-circuits to ``G0 = 0``.
    """
    At = np.asarray(At, dtype=float)
    Bt = np.asarray(Bt, dtype=float).reshape(At.shape[0], -1)
    a0, _ = _abscissa(At)
    if sigma is None:
        if a0 < 0:
            return np.zeros((Bt.shape[1], At.shape[0]))
        sigma = max(0.0, a0) + margin
    elif sigma <= a0:
        raise InitializationError(f"Bass shift sigma={sigma} must exceed the abscissa {a0}")
    if a0 < 0:
        k, V, Ak = At.shape[0], np.eye(At.shape[0]), At
    else:
        S, V, k = sl.schur(At.T, output="real", sort=lambda re, im: re >= 0)
        V = V[:, :k]
        Ak = S[:k, :k].T
    Bk = V.T @ Bt
    F = (Ak + sigma * np.eye(k)).T
    Z = lyapunov_solve(F, -2.0 * Bk @ Bk.T)
    G0 = Bk.T @ sl.pinvh(Z, rtol=rcond) @ V.T
    a1, worst = _abscissa(At - Bt @ G0)
    if not a1 < 0:
        raise InitializationError(
            f"initialization failed: closed-loop eigenvalue {worst} is not stable", worst
        )
    return G0


def are_residual(At, Bt, Q, R, P):
    """Relative Frobenius residual ``||At^T P + P At - P Bt R^-1 Bt^T P + Q|| / ||Q||``."""
    PB = P @ Bt
    res = At.T @ P + P @ At - PB @ np.linalg.solve(R, PB.T) + Q
    return float(np.linalg.norm(res) / np.linalg.norm(Q))


def newton_kleinman(At, Bt, Q, R, G0, tol=1e-9, max_iter=50, trace_rtol=1e-8):
    """Newton-Kleinman iteration from a stabilizing gain ``G0``.

    Each step solves ``(At - Bt G)^T P + P (At - Bt G) + Q + G^T R G = 0``
    and updates ``G = R^-1 Bt^T P``. The returned ``G`` is in the
    coordinates of ``At``, i.e. ``u = -G Y``; with ``Bt = E^-1 B`` this is
    ``R^-1 B^T E^-1 P``.
    """
    At = np.asarray(At, dtype=float)
    Bt = np.asarray(Bt, dtype=float).reshape(At.shape[0], -1)
    Q = np.asarray(Q, dtype=float)
    R = np.atleast_2d(np.asarray(R, dtype=float))
    G = np.asarray(G0, dtype=float).reshape(Bt.shape[1], At.shape[0])
    Rfac = spd_factor(R)
    history = []
    prev_trace = np.inf
    P = None
    for k in range(1, max_iter + 1):
        Ak = At - Bt @ G
        ak, worst = _abscissa(Ak)
        if not ak < 0:
            raise RiccatiError(f"lost stabilization at iteration {k}: eigenvalue {worst}")
        P = lyapunov_solve(Ak, Q + G.T @ R @ G)
        tr = float(np.trace(P))
        if tr > prev_trace * (1 + trace_rtol) + trace_rtol:
            raise RiccatiError(
                f"trace(P) increased at iteration {k}: {prev_trace:.12g} -> {tr:.12g}"
            )
        prev_trace = tr
        G = Rfac.solve(Bt.T @ P)
        res = are_residual(At, Bt, Q, R, P)
        history.append(res)
        log.debug("newton-kleinman iteration %d: residual %.3e", k, res)
        if res <= tol:
            ab, _ = _abscissa(At - Bt @ G)
            return RiccatiSolution(P, G, res, ab, k, history)
    raise NonConvergenceError(
        f"Newton-Kleinman did not converge in {max_iter} iterations (residual {history[-1]:.3e})",
        history,
    )


def solve_feedback(blocks, tol=1e-9, max_iter=50, sigma=None):
    """Riccati gain for assembled blocks; ``G`` acts on ``Y = (y, z)``."""
    At, Bt, Q, R = reduce_to_standard(blocks)
    G0 = stabilizing_initial_gain(At, Bt, sigma=sigma)
    return newton_kleinman(At, Bt, Q, R, G0, tol=tol, max_iter=max_iter)
