import numpy as np
import pytest

from memstab import assemble_mass, assemble_stiffness, build_unit_square_mesh, paper_params
from memstab.steady import SINSIN, SteadySolveError, manufacture_forcing, newton_steady, steady_residual


def test_zero_is_steady(mesh8, params):
    r, _ = steady_residual(np.zeros(mesh8.n_interior), np.zeros(mesh8.n_interior), mesh8, params)
    assert np.all(r == 0)


def test_linear_residual(mesh8, params):
    p = params.replace(alpha=0.0, beta=0.0)
    rng = np.random.default_rng(3)
    y, f = rng.standard_normal((2, mesh8.n_interior))
    r, _ = steady_residual(y, f, mesh8, p)
    L = assemble_stiffness(mesh8)
    assert np.allclose(r, (p.eta + p.kappa / p.lam) * (L @ y) - f, rtol=0, atol=1e-13)


def test_jacobian_finite_differences(params):
    m = build_unit_square_mesh(4)
    rng = np.random.default_rng(5)
    y, f = rng.uniform(-1, 1, (2, m.n_interior))
    _, J = steady_residual(y, f, m, params)
    J = J.toarray()
    h = 1e-6
    fd = np.column_stack([
        (steady_residual(y + h * e, f, m, params)[0] - steady_residual(y - h * e, f, m, params)[0]) / (2 * h)
        for e in np.eye(m.n_interior)
    ])
    assert np.max(np.abs(J - fd)) / np.max(np.abs(J)) <= 1e-6


def test_manufactured_forcing(mesh16, params):
    zero = manufacture_forcing(lambda a, b: 0 * a, mesh16, params)
    assert np.all(zero.f_inf_load == 0)
    ss = manufacture_forcing(SINSIN, mesh16, params)
    r, _ = steady_residual(ss.y_inf, ss.f_inf_load, mesh16, params)
    assert np.max(np.abs(r)) <= 1e-14
    with pytest.raises(ValueError, match="boundary"):
        manufacture_forcing(lambda a, b: 1 + a, mesh16, params)


def test_manufactured_linear_load_order():
    # f = (eta + kappa/lam) 2 pi^2 M y_inf up to O(h^2)
    p = paper_params(alpha=0.0, beta=0.0)
    errs = []
    for n in (8, 16):
        m = build_unit_square_mesh(n)
        ss = manufacture_forcing(SINSIN, m, p)
        ref = p.effective_diffusion * 2 * np.pi ** 2 * (assemble_mass(m) @ ss.y_inf)
        errs.append(np.max(np.abs(ss.f_inf_load - ref)) / np.max(np.abs(ref)))
    assert errs[1] < 0.05
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_newton_zero(mesh8, params):
    st = newton_steady(np.zeros(mesh8.n_interior), mesh8, params, y_start=np.zeros(mesh8.n_interior))
    assert np.all(st.y_inf == 0)
    assert len(st.newton_history) <= 2


def test_newton_recovers_manufactured(mesh16, params):
    ss = manufacture_forcing(SINSIN, mesh16, params)
    st = newton_steady(ss.f_inf_load, mesh16, params, y_start=1.05 * ss.y_inf)
    assert np.max(np.abs(st.y_inf - ss.y_inf)) <= 1e-9
    assert len(st.newton_history) - 1 <= 6
    assert st.residual_norm <= 1e-10


def test_newton_linear_one_step(mesh8, params):
    p = params.replace(alpha=0.0, beta=0.0)
    f = np.random.default_rng(2).standard_normal(mesh8.n_interior)
    st = newton_steady(f, mesh8, p, y_start=np.zeros(mesh8.n_interior))
    assert len(st.newton_history) - 1 == 1


def test_newton_failure_reports_history(mesh8, params):
    ss = manufacture_forcing(SINSIN, mesh8, params)
    with pytest.raises(SteadySolveError) as info:
        newton_steady(ss.f_inf_load, mesh8, params, y_start=1.5 * ss.y_inf, max_iter=1)
    assert len(info.value.history) >= 1
