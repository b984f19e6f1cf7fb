"""Feedback stabilization of the Burgers-Huxley equation with fading memory."""

__version__ = "0.1.0"

from .params import ModelParams, load_params, paper_params
from .mesh import Mesh, build_unit_square_mesh, nodes_in_region, FULL_DOMAIN
from .assembly import (
    OperatorBlocks,
    assemble_coupled,
    assemble_mass,
    assemble_nonlinear,
    assemble_stiffness,
)
from .spectral import (
    analytic_spectrum,
    complex_band,
    count_unstable,
    discrete_spectrum,
    laplacian_eigenvalues_square,
    mu_pair,
)
from .numkit import lyapunov_solve, spd_factor
from .riccati import RiccatiSolution, newton_kleinman, solve_feedback
from .steady import SteadyState, manufacture_forcing, newton_steady
from .sim import SimConfig, SimResult, decay_fit, memory_consistency, shifted_equivalence_check, simulate
