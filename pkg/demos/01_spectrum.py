"""
Spectrum of the coupled memory operator
=======================================

Each Dirichlet-Laplacian eigenvalue gives two eigenvalues of the coupled
operator. On the unit square these are known in closed form, so the finite
element spectrum can be checked against them directly.
"""

# %%
import numpy as np

from memstab import (analytic_spectrum, assemble_coupled, build_unit_square_mesh, complex_band,
                     count_unstable, discrete_spectrum, paper_params)

p = paper_params()
print("nu0 =", p.nu0)
print("complex band:", complex_band(p))

# %%
# The first few pairs. Inside the band they are complex conjugates.
for e in analytic_spectrum(p, 6).entries:
    print(f"Lambda/pi^2 = {e.Lambda / np.pi**2:5.1f} (x{e.multiplicity})  mu+ = {e.mu_plus:.4f}")

# %%
# A shift nu asks for decay faster than e^{-nu t}. With nu = 4 exactly one
# conjugate pair crosses into the right half plane.
for nu in (1.0, 4.0, 7.0):
    count, mus = count_unstable(p, nu, 50)
    print(f"nu = {nu}: {count} unstable", [f"{mu + nu:.3f}" for mu in mus])

# %%
# The P1 discretization at n=16 sees the same pair, slightly displaced.
ev = discrete_spectrum(assemble_coupled(build_unit_square_mesh(16), p.replace(nu=4.0)))
print("discrete, Re > 0:", ev[ev.real > 0])
