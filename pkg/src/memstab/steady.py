"""Stationary problem with effective diffusion ``eta + kappa/lam``.

Weak residual on the interior DOFs::

    r(y) = (eta + kappa/lam) L y + beta*gamma M y + N(y) - f

where ``N`` holds the advection and the remaining reaction terms (see
:func:`memstab.assembly.assemble_nonlinear`).
"""

import functools
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as sla

from .assembly import assemble_mass, assemble_nonlinear, assemble_stiffness

__all__ = [
    "SteadyState",
    "SteadySolveError",
    "steady_residual",
    "manufacture_forcing",
    "newton_steady",
    "SINSIN",
]

log = logging.getLogger(__name__)


def SINSIN(x1, x2):
    return np.sin(np.pi * x1) * np.sin(np.pi * x2)


class SteadySolveError(RuntimeError):
    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


@dataclass
class SteadyState:
    y_inf: np.ndarray
    f_inf_load: np.ndarray
    residual_norm: float
    newton_history: list = field(default_factory=list)


@functools.lru_cache(maxsize=8)
def _matrices(mesh):
    return assemble_mass(mesh), assemble_stiffness(mesh)


def steady_residual(y, f_load, mesh, params):
    """Residual vector and sparse Jacobian of the stationary equation."""
    M, L = _matrices(mesh)
    y = np.asarray(y, dtype=float)
    lin = params.effective_diffusion * L + params.beta_gamma * M
    r = lin @ y - np.asarray(f_load, dtype=float)
    if params.alpha == 0 and params.beta == 0:
        return r, lin.tocsr()
    n, J = assemble_nonlinear(mesh, params, y)
    return r + n, (lin + J).tocsr()


def manufacture_forcing(expr, mesh, params, rtol=1e-12):
    """Load vector that makes the interpolant of ``expr`` an exact discrete steady state.

    ``expr(x1, x2)`` must vanish on the boundary of the unit square.
    """
    b = mesh.nodes[mesh.boundary_mask]
    bvals = np.asarray(expr(b[:, 0], b[:, 1]), dtype=float) * np.ones(len(b))
    ivals = mesh.interpolate(expr)
    scale = max(1.0, float(np.max(np.abs(ivals), initial=0.0)))
    if np.max(np.abs(bvals)) > rtol * scale:
        raise ValueError(
            f"expr does not vanish on the boundary (max |expr| = {np.max(np.abs(bvals)):.3e})"
        )
    f_load, _ = steady_residual(ivals, np.zeros_like(ivals), mesh, params)
    r, _ = steady_residual(ivals, f_load, mesh, params)
    return SteadyState(ivals, f_load, float(np.linalg.norm(r)), [])


def newton_steady(f_load, mesh, params, y_start=None, tol=1e-10, max_iter=50, max_halvings=10):
    """Damped Newton iteration for the stationary equation.

    Starts from the linear solution (``alpha = beta = 0``) unless ``y_start``
    is given. A step is halved while it fails to reduce the residual norm.

    Raises
    ------
    SteadySolveError
        On a singular Jacobian, on five consecutive residual increases, or
        when ``max_iter`` is exhausted.
    """
    f_load = np.asarray(f_load, dtype=float)
    if y_start is None:
        _, lin = steady_residual(np.zeros_like(f_load), f_load, mesh, params.replace(alpha=0.0, beta=0.0))
        lin = (lin + params.beta_gamma * _matrices(mesh)[0]).tocsc()
        y = sla.spsolve(lin, f_load)
    else:
        y = np.array(y_start, dtype=float)
    r, J = steady_residual(y, f_load, mesh, params)
    norm = float(np.linalg.norm(r))
    history = [norm]
    increases = 0
    for _ in range(max_iter):
        if norm <= tol:
            break
        try:
            lu = sla.splu(J.tocsc())
        except RuntimeError as exc:
            raise SteadySolveError(f"singular Jacobian: {exc}", history) from exc
        step = lu.solve(-r)
        if not np.all(np.isfinite(step)):
            raise SteadySolveError("singular Jacobian: non-finite Newton step", history)
        t = 1.0
        for _ in range(max_halvings + 1):
            y_new = y + t * step
            r_new, J_new = steady_residual(y_new, f_load, mesh, params)
            new_norm = float(np.linalg.norm(r_new))
            if new_norm < norm:
                break
            t *= 0.5
        increases = increases + 1 if new_norm > norm else 0
        y, r, J, norm = y_new, r_new, J_new, new_norm
        history.append(norm)
        log.debug("steady newton: residual %.3e (step %.3g)", norm, t)
        if increases >= 5:
            raise SteadySolveError("Newton iteration diverged", history)
    else:
        if norm > tol:
            raise SteadySolveError(f"no convergence in {max_iter} iterations (residual {norm:.3e})", history)
    return SteadyState(y, f_load, norm, history)
