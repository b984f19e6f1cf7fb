"""
Stabilizing the zero state
==========================

Open- and closed-loop runs of the shifted system with nu = 4, linear and
nonlinear, from the bump x1(1-x1)x2(1-x2). Energies are reported for the
shifted variables, so decay here means decay faster than e^{-4t}.
"""

# %%
import numpy as np

from memstab import assemble_coupled, build_unit_square_mesh, paper_params
from memstab.riccati import solve_feedback
from memstab.sim import SimConfig, simulate

n = 16
p = paper_params(nu=4.0)
mesh = build_unit_square_mesh(n)
gain = solve_feedback(assemble_coupled(mesh, p))

# %%
runs = {
    "linear open": SimConfig("LinearOpen", params=p, mesh=mesh, n=n),
    "linear closed": SimConfig("LinearClosed", params=p, mesh=mesh, n=n, gain=gain),
    "nonlinear open": SimConfig("NonlinearOpen", params=p, mesh=mesh, n=n),
    "nonlinear closed": SimConfig("NonlinearClosed", params=p, mesh=mesh, n=n, gain=gain),
}
for name, cfg in runs.items():
    res = simulate(cfg)
    every = np.searchsorted(res.times, np.arange(0, 5.01, 1.0))
    print(f"{name:17s} rate {res.fitted_rate:+.3f}  |y|(t)/|y0| at t=0..5:",
          np.round(res.l2_energy[every] / res.l2_energy[0], 3))

# %%
# The open loop oscillates with a slowly growing envelope: the unstable pair
# has real part 0.15 and frequency 5.4. The feedback turns this into decay
# at the closed-loop abscissa, about -0.53.
