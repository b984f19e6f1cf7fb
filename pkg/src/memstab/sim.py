"""Time integration of the open- and closed-loop coupled systems.

The state is ``(y, z)`` with ``z`` the memory variable, ``z' = y - lam z``.
When ``shifted`` is set the integrated unknowns are ``e^{nu t} (y, z)``;
otherwise the unshifted system is integrated and energies are weighted by
``e^{nu t}`` afterwards, so reported energies always refer to the shifted
variables.

The memory row is diagonal after cancelling the mass matrix, so ``z`` at
the new time level is eliminated and every step solves an ``N x N``
system in ``y`` only.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sl
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.signal import find_peaks

from .assembly import NonFiniteError, assemble_coupled, assemble_nonlinear
from .mesh import FULL_DOMAIN, build_unit_square_mesh
from .params import ModelParams

__all__ = [
    "SCENARIOS",
    "SimConfig",
    "SimResult",
    "SimulationError",
    "InitialData",
    "simulate",
    "decay_fit",
    "memory_update",
    "memory_consistency",
    "shifted_equivalence_check",
]

log = logging.getLogger(__name__)

SCENARIOS = (
    "LinearOpen",
    "LinearClosed",
    "NonlinearOpen",
    "NonlinearClosed",
    "SteadyNonlinearOpen",
    "SteadyNonlinearClosed",
)


class SimulationError(RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


def _bump(x1, x2):
    return x1 * (1 - x1) * x2 * (1 - x2)


def _sinsin(x1, x2):
    return np.sin(np.pi * x1) * np.sin(np.pi * x2)


InitialData = {
    "bump": _bump,
    "sinsin": _sinsin,
    "zero": lambda x1, x2: 0.0 * x1,
}


@dataclass
class SimConfig:
    """Configuration of one trajectory.

    ``gain`` is a :class:`~memstab.riccati.RiccatiSolution` or a gain matrix
    ``G`` acting on ``(y, z)``; ``steady`` a
    :class:`~memstab.steady.SteadyState`. ``initial`` names an entry of
    :data:`InitialData`, or is a callable ``f(x1, x2)`` or a coefficient
    vector; for steady scenarios it is the initial ``y``, and the simulated
    perturbation starts at ``y0 - y_inf``. ``theta = 1`` is implicit Euler,
    ``0.5`` Crank-Nicolson.
    """

    scenario: str = "LinearOpen"
    shifted: bool = True
    dt: float = 1e-3
    T: float = 5.0
    n: int = 16
    params: ModelParams = field(default_factory=ModelParams)
    initial: object = "bump"
    gain: object = None
    steady: object = None
    newton_tol: float = 1e-10
    newton_max: int = 25
    theta: float = 1.0
    region: tuple = FULL_DOMAIN
    snapshot_every: int = 0
    mesh: object = None

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.T >= self.dt:
            raise ValueError(f"T must be at least dt, got T={self.T}, dt={self.dt}")
        closed = self.scenario.endswith("Closed")
        if closed != (self.gain is not None):
            raise ValueError(f"scenario {self.scenario} {'requires' if closed else 'forbids'} a gain")
        steady = self.scenario.startswith("Steady")
        if steady != (self.steady is not None):
            raise ValueError(f"scenario {self.scenario} {'requires' if steady else 'forbids'} a steady state")
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0.5, 1], got {self.theta}")
        return self

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))


@dataclass
class SimResult:
    """Energy history of a trajectory.

    Energies are mass-matrix norms (``h1_energy``: stiffness seminorm) of the
    shifted variables. ``snapshots`` holds ``(y, z)`` in the integration
    frame at ``snapshot_times``; ``memory_rate`` is the decay rate of ``z``
    in that frame.
    """

    times: np.ndarray
    l2_energy: np.ndarray
    h1_energy: np.ndarray
    aux_l2: np.ndarray
    fitted_rate: float
    monotone_flag: bool
    blowup_time: float = None
    snapshots: dict = None
    snapshot_times: np.ndarray = None
    memory_rate: float = None
    frame_shift: float = 0.0
    nu: float = 0.0
    newton_iterations: int = 0

    def unshifted_l2(self):
        return self.l2_energy * np.exp(-self.nu * self.times)

    def summary(self):
        out = {
            "fitted_rate": self.fitted_rate,
            "monotone_flag": bool(self.monotone_flag),
            "final_over_initial": float(self.l2_energy[-1] / self.l2_energy[0]) if self.l2_energy[0] > 0 else None,
        }
        if self.blowup_time is not None:
            out["blowup_time"] = self.blowup_time
        return out


def memory_update(z, y_old, y_new, dt, rate, theta=1.0):
    """One theta-step of ``z' = y - rate z``."""
    return (z * (1 - (1 - theta) * dt * rate) + dt * ((1 - theta) * y_old + theta * y_new)) / (1 + theta * dt * rate)


def decay_fit(times, energies, window=None, envelope=None):
    """Exponential rate of ``energies`` by least squares on ``log(energy)``.

    ``window`` is the trailing time span used (default: all samples). With
    oscillating data the fit goes through the local maxima (per-period
    envelope); ``envelope=None`` switches this on when at least two peaks
    exist in the window.
    """
    t = np.asarray(times, dtype=float)
    e = np.asarray(energies, dtype=float)
    if window is not None:
        keep = t >= t[-1] - window - 1e-12 * max(1.0, abs(t[-1]))
        t, e = t[keep], e[keep]
    if len(t) < 2:
        raise ValueError("need at least two samples in the fit window")
    if not np.all(e > 0):
        raise ValueError("energies must be positive on the fit window")
    le = np.log(e)
    if envelope is not False:
        peaks, _ = find_peaks(le)
        if len(peaks) >= 2:
            t, le = t[peaks], le[peaks]
        elif envelope:
            raise ValueError("envelope fit needs at least two peaks in the window")
    slope = np.polyfit(t - t.mean(), le, 1)[0]
    return float(slope)


def _initial_vector(mesh, initial):
    if isinstance(initial, str):
        try:
            return mesh.interpolate(InitialData[initial])
        except KeyError:
            raise ValueError(f"unknown initial data {initial!r}; choose from {sorted(InitialData)}") from None
    if callable(initial):
        return mesh.interpolate(initial)
    y0 = np.asarray(initial, dtype=float)
    if y0.shape != (mesh.n_interior,):
        raise ValueError(f"initial vector must have {mesh.n_interior} entries")
    return y0


def _gain_matrix(gain):
    return np.asarray(getattr(gain, "G", gain), dtype=float)


class _Integrator:
    def __init__(self, cfg):
        self.cfg = cfg
        p = cfg.params
        self.mesh = cfg.mesh if cfg.mesh is not None else build_unit_square_mesh(cfg.n)
        self.blocks = assemble_coupled(self.mesh, p, cfg.region)
        self.sigma = p.nu if cfg.shifted else 0.0
        self.rate = p.lam - self.sigma
        self.nonlinear = not cfg.scenario.startswith("Linear")
        self.closed = cfg.scenario.endswith("Closed")
        self.steady = cfg.steady.y_inf if cfg.steady is not None else None
        M, L = self.blocks.M, self.blocks.L
        N = M.shape[0]
        self.Ky = -p.eta * L - p.beta_gamma * M + self.sigma * M
        self.Kz = -p.kappa * L
        if self.closed:
            G = _gain_matrix(cfg.gain)
            if G.shape != (self.blocks.m, 2 * N):
                raise ValueError(f"gain has shape {G.shape}, expected {(self.blocks.m, 2 * N)}")
            BG = self.blocks.B[:N].toarray() @ G
            self.Ky = self.Ky.toarray() - BG[:, :N]
            self.Kz = self.Kz.toarray() - BG[:, N:]
        th, dt = cfg.theta, cfg.dt
        self.s = th * dt / (1 + th * dt * self.rate)
        S0 = M - th * dt * (self.Ky + self.s * self.Kz)
        self.S0 = np.asarray(S0) if self.closed else sp.csc_matrix(S0)
        self._lin_solver = None
        if self.steady is not None:
            self.n_inf, _ = assemble_nonlinear(self.mesh, p, self.steady, jacobian=False)
            self.Ly_inf = L @ self.steady

    def F_lin(self, y, z):
        return self.Ky @ y + self.Kz @ z

    def nonlin(self, t, y, jacobian=True):
        """Shifted nonlinear load ``e^{st} [N(e^{-st} y + y_inf) - N(y_inf)]``."""
        if not self.nonlinear:
            return None, None
        scale = math.exp(self.sigma * t)
        arg = y / scale
        if self.steady is not None:
            arg = arg + self.steady
        r, J = assemble_nonlinear(self.mesh, self.cfg.params, arg, jacobian=jacobian)
        if self.steady is not None:
            r = r - self.n_inf
        return scale * r, J

    def forcing(self, t):
        if self.steady is None:
            return 0.0
        p = self.cfg.params
        return (p.kappa / p.lam) * math.exp((self.sigma - p.lam) * t) * self.Ly_inf

    def solve(self, J, rhs):
        th, dt = self.cfg.theta, self.cfg.dt
        if J is None:
            if self._lin_solver is None:
                if self.closed:
                    lu = sl.lu_factor(self.S0)
                    self._lin_solver = lambda b: sl.lu_solve(lu, b)
                else:
                    self._lin_solver = sla.splu(self.S0).solve
            return self._lin_solver(rhs)
        if self.closed:
            return sl.solve(self.S0 + th * dt * J.toarray(), rhs)
        return sla.splu((self.S0 + th * dt * J).tocsc()).solve(rhs)

    def step(self, t0, y0, z0, k):
        cfg = self.cfg
        th, dt = cfg.theta, cfg.dt
        t1 = t0 + dt
        M = self.blocks.M
        zc = (z0 * (1 - (1 - th) * dt * self.rate) + (1 - th) * dt * y0) / (1 + th * dt * self.rate)
        base = M @ y0 + th * dt * (self.Kz @ zc + self.forcing(t1))
        if th < 1:
            n0, _ = self.nonlin(t0, y0, jacobian=False)
            f0 = self.F_lin(y0, z0) + self.forcing(t0)
            if n0 is not None:
                f0 = f0 - n0
            base = base + (1 - th) * dt * f0
        if not self.nonlinear:
            y1 = self.solve(None, base)
            return y1, zc + self.s * y1, 0
        y1 = y0.copy()
        scale = np.linalg.norm(base) + np.linalg.norm(M @ y0)
        for it in range(1, cfg.newton_max + 1):
            n1, J = self.nonlin(t1, y1)
            res = self.S0 @ y1 + th * dt * n1 - base
            rnorm = np.linalg.norm(res)
            if not np.isfinite(rnorm):
                raise NonFiniteError(f"non-finite residual at step {k}")
            if rnorm <= cfg.newton_tol * scale:
                return y1, zc + self.s * y1, it - 1
            delta = self.solve(J, -res)
            y1 = y1 + delta
            if not np.all(np.isfinite(y1)):
                raise NonFiniteError(f"non-finite Newton iterate at step {k}")
            if np.linalg.norm(delta) <= cfg.newton_tol * max(np.linalg.norm(y1), 1e-300):
                return y1, zc + self.s * y1, it
        raise SimulationError(
            f"Newton did not converge at step {k} (t={t1:.6g}, residual {rnorm:.3e})", step=k
        )


def simulate(config):
    """Integrate one scenario and record energies at every step.

    Non-finite states end the run early with ``blowup_time`` set; Newton
    failure with finite iterates raises :class:`SimulationError`.
    """
    cfg = config.validate()
    ig = _Integrator(cfg)
    mesh, M, L = ig.mesh, ig.blocks.M, ig.blocks.L
    y = _initial_vector(mesh, cfg.initial)
    if ig.steady is not None:
        y = y - ig.steady
    z = np.zeros_like(y)
    nsteps = cfg.n_steps
    extra = cfg.params.nu - ig.sigma

    def energies(t, y, z):
        w = math.exp(extra * t)
        return (w * math.sqrt(max(y @ (M @ y), 0.0)), w * math.sqrt(max(y @ (L @ y), 0.0)),
                w * math.sqrt(max(z @ (M @ z), 0.0)))

    times, l2, h1, aux = [0.0], [], [], []
    e = energies(0.0, y, z)
    l2.append(e[0]); h1.append(e[1]); aux.append(e[2])
    snaps_t, snaps_y, snaps_z = [], [], []
    every = cfg.snapshot_every
    if every:
        snaps_t.append(0.0); snaps_y.append(y.copy()); snaps_z.append(z.copy())

    blowup = None
    newton_total = 0
    t = 0.0
    for k in range(1, nsteps + 1):
        try:
            with np.errstate(over="raise", invalid="raise"):
                y_new, z_new, its = ig.step(t, y, z, k)
                e = energies(k * cfg.dt, y_new, z_new)
        except (NonFiniteError, FloatingPointError) as exc:
            blowup = k * cfg.dt
            log.info("blow-up at step %d (t=%.6g): %s", k, blowup, exc)
            break
        if not (np.all(np.isfinite(y_new)) and all(np.isfinite(e))):
            blowup = k * cfg.dt
            break
        newton_total += its
        y, z = y_new, z_new
        t = k * cfg.dt
        times.append(t)
        l2.append(e[0]); h1.append(e[1]); aux.append(e[2])
        if every and k % every == 0:
            snaps_t.append(t); snaps_y.append(y.copy()); snaps_z.append(z.copy())

    times = np.array(times)
    l2 = np.array(l2)
    rate = float("nan")
    monotone = False
    if len(times) >= 2 and np.all(l2 > 0):
        window = 0.5 * times[-1]
        rate = decay_fit(times, l2, window=window)
        tail = l2[times >= times[-1] - window]
        monotone = bool(np.all(np.diff(tail) <= 1e-12 * tail[:-1]))
    snapshots = None
    if every:
        snapshots = {"y": np.array(snaps_y), "z": np.array(snaps_z)}
    return SimResult(
        times=times, l2_energy=l2, h1_energy=np.array(h1), aux_l2=np.array(aux),
        fitted_rate=rate, monotone_flag=monotone, blowup_time=blowup,
        snapshots=snapshots, snapshot_times=np.array(snaps_t) if every else None,
        memory_rate=ig.rate, frame_shift=ig.sigma, nu=cfg.params.nu,
        newton_iterations=newton_total,
    )


def memory_consistency(result, eps=1e-12):
    """Largest relative gap between the integrated ``z`` and the history integral.

    The reference is the trapezoidal rule applied to
    ``int_0^t exp(-rate (t - s)) y(s) ds`` with the stored ``y`` samples.
    """
    if result.snapshots is None or result.snapshot_times is None:
        raise ValueError("memory check needs snapshots at every step (snapshot_every=1)")
    ts = result.snapshot_times
    dts = np.diff(ts)
    if len(dts) == 0 or not np.allclose(dts, dts[0], rtol=1e-9):
        raise ValueError("memory check needs snapshots at every step (snapshot_every=1)")
    dt = dts[0]
    ys, zs = result.snapshots["y"], result.snapshots["z"]
    decay = math.exp(-result.memory_rate * dt)
    zq = np.zeros_like(ys[0])
    worst = 0.0
    for k in range(1, len(ts)):
        zq = decay * zq + 0.5 * dt * (decay * ys[k - 1] + ys[k])
        dev = np.linalg.norm(zs[k] - zq) / (np.linalg.norm(zq) + eps)
        worst = max(worst, dev)
    return float(worst)


def shifted_equivalence_check(config):
    """Largest relative gap between shifted and post-weighted unshifted runs."""
    if not config.scenario.startswith("Linear"):
        raise ValueError("shifted equivalence is defined for linear scenarios only")
    base = dict(config.__dict__)
    base["snapshot_every"] = 1
    a = simulate(SimConfig(**{**base, "shifted": True}))
    b = simulate(SimConfig(**{**base, "shifted": False}))
    nu = config.params.nu
    worst = 0.0
    for k, t in enumerate(a.snapshot_times):
        ya = np.concatenate([a.snapshots["y"][k], a.snapshots["z"][k]])
        yb = math.exp(nu * t) * np.concatenate([b.snapshots["y"][k], b.snapshots["z"][k]])
        den = np.linalg.norm(ya)
        if den > 0:
            worst = max(worst, np.linalg.norm(ya - yb) / den)
    return float(worst)
