import math

import numpy as np
import pytest
import scipy.linalg as sl
import scipy.sparse as sp

from memstab import assemble_coupled, build_unit_square_mesh, mu_pair, paper_params
from memstab.assembly import OperatorBlocks
from memstab.riccati import (
    InitializationError, NonConvergenceError, RiccatiError, are_residual, newton_kleinman,
    reduce_to_standard, solve_feedback, stabilizing_initial_gain,
)


def toy_blocks():
    p = paper_params(eta=1.0, kappa=0.0, beta=0.0, lam=1.0)
    M = sp.csr_matrix([[2.0]])
    L = sp.csr_matrix([[1.0]])
    E = sp.block_diag([M, M], format="csr")
    A = sp.bmat([[-L, None], [M, -M]], format="csr")
    B = sp.csr_matrix([[2.0], [0.0]])
    return OperatorBlocks(None, p, M, L, E, A, A.copy(), B, M, np.array([0]))


def test_reduce_toy_by_hand():
    At, Bt, Q, R = reduce_to_standard(toy_blocks())
    assert np.allclose(At, [[-0.5, 0.0], [1.0, -1.0]])
    assert np.allclose(Bt, [[1.0], [0.0]])
    assert np.array_equal(Q, 2 * np.eye(2))
    assert np.array_equal(R, [[2.0]])


def test_reduce_full_control(mesh8, params):
    b = assemble_coupled(mesh8, params.replace(nu=4.0))
    At, Bt, Q, R = reduce_to_standard(b)
    assert np.array_equal(Q, b.E.toarray())
    N = b.N
    assert np.allclose(Bt, np.vstack([np.eye(N), np.zeros((N, N))]), atol=1e-12)


def test_scalar_initial_gain():
    g0 = stabilizing_initial_gain(np.array([[1.0]]), np.array([[1.0]]), sigma=2.0)
    assert g0[0, 0] == pytest.approx(3.0, rel=1e-12)
    assert stabilizing_initial_gain(-np.eye(3), np.ones((3, 1))).tolist() == [[0.0, 0.0, 0.0]]
    with pytest.raises(InitializationError):
        stabilizing_initial_gain(np.array([[1.0]]), np.array([[1.0]]), sigma=0.5)


def test_initial_gain_reference(mesh8, params):
    b = assemble_coupled(mesh8, params.replace(nu=4.0))
    At, Bt, _, _ = reduce_to_standard(b)
    # coarse-mesh abscissa: the analytic root at the first discrete Laplacian eigenvalue
    lam_h = np.sort(sl.eigh(b.L.toarray(), b.M.toarray(), eigvals_only=True))[0]
    expected = mu_pair(lam_h, params)[0].real + 4.0
    assert np.linalg.eigvals(At).real.max() == pytest.approx(expected, abs=1e-9)
    assert expected > 0
    G0 = stabilizing_initial_gain(At, Bt)
    assert np.linalg.eigvals(At - Bt @ G0).real.max() < 0


def test_scalar_riccati():
    one = np.array([[1.0]])
    sol = newton_kleinman(one, one, one, one, np.array([[3.0]]), tol=1e-13)
    assert sol.P[0, 0] == pytest.approx(1 + math.sqrt(2), abs=1e-10)
    assert sol.residual <= 1e-12
    assert sol.closed_loop_abscissa == pytest.approx(-math.sqrt(2), abs=1e-10)


def test_feedback_free_case():
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    sol = newton_kleinman(-np.eye(2), np.zeros((2, 1)), Q, np.eye(1), np.zeros((1, 2)))
    assert np.allclose(sol.P, Q / 2)


def test_against_scipy_care(mesh8, params):
    b = assemble_coupled(mesh8, params.replace(nu=4.0))
    At, Bt, Q, R = reduce_to_standard(b)
    sol = newton_kleinman(At, Bt, Q, R, stabilizing_initial_gain(At, Bt))
    ref = sl.solve_continuous_are(At, Bt, Q, R)
    assert np.max(np.abs(sol.P - ref)) <= 1e-8 * np.max(np.abs(ref))
    assert are_residual(At, Bt, Q, R, sol.P) <= 1e-9


@pytest.mark.parametrize("scale", [1e-3, 0.37, 25.0])
def test_gain_coscaling_invariance(scale, mesh8, params):
    At, Bt, Q, R = reduce_to_standard(assemble_coupled(build_unit_square_mesh(4), params.replace(nu=4.0)))
    G0 = stabilizing_initial_gain(At, Bt)
    g1 = newton_kleinman(At, Bt, Q, R, G0).G
    g2 = newton_kleinman(At, Bt, scale * Q, scale * R, G0).G
    assert np.max(np.abs(g1 - g2)) <= 1e-8 * np.max(np.abs(g1))


def test_solution_invariants(mesh8, params):
    sol = solve_feedback(assemble_coupled(mesh8, params.replace(nu=4.0)))
    assert np.array_equal(sol.P, sol.P.T)
    assert np.linalg.eigvalsh(sol.P).min() >= -1e-10 * np.linalg.norm(sol.P, 2)
    assert sol.residual <= 1e-9
    assert sol.closed_loop_abscissa < 0
    assert sol.iterations == len(sol.history)


def test_partial_control_region(mesh8, params):
    b = assemble_coupled(mesh8, params.replace(nu=4.0), (0.0, 0.5, 0.0, 1.0))
    sol = solve_feedback(b)
    assert sol.G.shape == (b.m, b.dim)
    assert sol.closed_loop_abscissa < 0


def test_errors():
    one = np.array([[1.0]])
    with pytest.raises(RiccatiError, match="lost stabilization"):
        newton_kleinman(one, one, one, one, np.array([[0.5]]))
    A = np.array([[1.0, 0.0], [0.0, 2.0]])
    B = np.array([[1.0], [1.0]])
    G0 = stabilizing_initial_gain(A, B)
    with pytest.raises(NonConvergenceError) as info:
        newton_kleinman(A, B, np.eye(2), np.eye(1), G0, max_iter=1)
    assert len(info.value.history) == 1
