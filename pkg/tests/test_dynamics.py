import numpy as np
import pytest

import support as S
from msgas import conservation as cons
from msgas import dynamics as dyn
from msgas import geometry as geo


def test_clebsch_initialisation_is_consistent():
    model, st = S.smooth(2, 16)
    assert S.max_abs(dyn.clebsch_residual(model, st)) < 1e-15
    assert st.t == 0.0 and st.K_lin == 1
    with pytest.raises(ValueError):
        st.S[0, 0] = 1.0  # entropy is frozen per particle


def test_label_field_splits_linear_part():
    grid = geo.LabelGrid.uniform(2, 16, length=2.0)
    per, a = dyn.label_field(grid, "0.5*m1 - m2 + sin(pi*m2)", allow_linear=True)
    np.testing.assert_allclose(a, [0.5, -1.0], atol=1e-12)
    np.testing.assert_allclose(per, np.sin(np.pi * grid.coords[1]), atol=1e-12)
    with pytest.raises(dyn.PeriodicityError):
        dyn.label_field(grid, "0.5*m1")
    with pytest.raises(dyn.PeriodicityError):
        dyn.label_field(grid, "m1^2", allow_linear=True)


def test_background_strain_from_linear_displacement():
    model = S.model(2, 16)
    st = dyn.init_clebsch(model, displacement=["0.1*m1", "0"])
    np.testing.assert_allclose(st.x_bg, [[1.1, 0.0], [0.0, 1.0]])
    kin = dyn.Kinematics(model, st)
    np.testing.assert_allclose(kin.J, 1.1)


def test_uniform_gravity_free_fall():
    g = np.array([0.0, -0.5])
    model = S.model(2, 16, dyn.UniformPotential(-g))
    st = dyn.init_clebsch(model, S="0.3")
    t = 0.4
    out = S.evolve(model, st, t, 0.01)
    np.testing.assert_allclose(out.u, (g * t)[:, None, None] + 0 * out.u, atol=1e-13)
    np.testing.assert_allclose(out.disp, (0.5 * g * t * t)[:, None, None] + 0 * out.disp, atol=1e-13)
    assert S.max_abs(dyn.clebsch_residual(model, out)) < 1e-12


def test_uniform_translation_is_exact():
    model, st = S.translation(3, 8)
    out = S.evolve(model, st, 0.2, 0.02)
    np.testing.assert_allclose(out.u[0], 0.3, atol=1e-14)
    np.testing.assert_allclose(out.disp[2], 0.1 * 0.2, atol=1e-14)


def test_material_derivative_matches_time_difference():
    model, st = S.smooth(2, 16, dyn.UniformPotential(S.GRAVITY[2]))

    def fn(s):
        return cons.energy_density(model, s)

    exact = dyn.material_derivative(model, fn, st)
    h = 1e-3
    f = {k: fn(_rk4(model, st, k * h)) for k in (-2, -1, 1, 2)}
    fd = (8 * (f[1] - f[-1]) - (f[2] - f[-2])) / (12 * h)
    assert S.max_abs(exact - fd) < 1e-9


def _rk4(model, st, h):
    """One classical RK4 step of signed length ``h``."""
    k1 = dyn.full_rhs(model, st)
    k2 = dyn.full_rhs(model, st.advanced(k1, h / 2))
    k3 = dyn.full_rhs(model, st.advanced(k2, h / 2))
    k4 = dyn.full_rhs(model, st.advanced(k3, h))
    incr = k1.combine([(k1, 1 / 6), (k2, 1 / 3), (k3, 1 / 3), (k4, 1 / 6)])
    return st.advanced(incr, h)


@pytest.mark.parametrize("integrator, order", [("rk4", 4), ("leapfrog", 2)])
def test_temporal_order(integrator, order):
    model, st = S.smooth(2, 16)
    t_end = 0.2
    sols = [S.evolve(model, st, t_end, dt, integrator) for dt in (0.02, 0.01, 0.005, 0.0025)]
    errs = [S.max_abs(a.u - b.u) for a, b in zip(sols, sols[1:])]
    for a, b in zip(errs, errs[1:]):
        assert a / b >= S.ORDER_SAFETY * 2**order


def test_run_lands_on_t_end_and_respects_cadence():
    model, st = S.smooth(2, 16)
    res = dyn.run(model, st, 0.03, 0.1, diagnostics=lambda s: [s.t], cadence=2)
    assert res.steps == 4
    assert res.state.t == 0.1
    assert [r[0] for r in res.rows] == pytest.approx([0.0, 0.06, 0.1])
    assert len(res.monitors) == len(res.rows)


def test_run_stops_on_singular_map_and_keeps_rows():
    model = S.model(2, 16)
    st = dyn.init_clebsch(model, velocity=["-2*sin(2*pi*m1)", "0"])
    res = dyn.run(model, st, 0.01, 2.0, diagnostics=lambda s: [s.t])
    assert res.error is not None and "Jacobian" in res.error
    assert len(res.rows) >= 1 and res.steps < 200


@pytest.mark.parametrize("kwargs", [dict(dt=0.0), dict(dt=-1.0), dict(t_end=-1.0), dict(cadence=0)])
def test_run_validation(kwargs):
    model, st = S.smooth(2, 8)
    args = dict(dt=0.01, t_end=0.1, cadence=1) | kwargs
    with pytest.raises(ValueError):
        dyn.run(model, st, args["dt"], args["t_end"], cadence=args["cadence"])


def test_unknown_integrator():
    model, st = S.smooth(2, 8)
    with pytest.raises(ValueError):
        dyn.step(model, st, 0.01, "euler")


def test_expression_potential_gradient():
    pot = dyn.ExpressionPotential("0.2*sin(2*pi*x1)*cos(2*pi*x2)", 2)
    x = np.random.default_rng(0).uniform(0, 1, (2, 5))
    k = 2 * np.pi
    want = 0.2 * k * np.stack([np.cos(k * x[0]) * np.cos(k * x[1]), -np.sin(k * x[0]) * np.sin(k * x[1])])
    np.testing.assert_allclose(pot.gradient(x), want, atol=1e-14)


def test_uniform_potential_split_reassembles_value():
    pot = dyn.UniformPotential([0.3, -0.2])
    model = S.model(2, 8, pot)
    st = dyn.init_clebsch(model, displacement=["0.05*m1 + 0.01*sin(2*pi*m2)", "0"])
    per, lin = pot.split(st.x_bg, st.disp)
    m = model.grid.coords
    np.testing.assert_allclose(per + np.einsum("j,j...->...", lin, m), pot.value(st.positions(model.grid)), atol=1e-15)


def test_leapfrog_keeps_energy_bounded():
    model, st = S.smooth(2, 16)
    E0 = cons.total_energy(model, st)
    out = S.evolve(model, st, 0.5, 0.005, "leapfrog")
    assert abs(cons.total_energy(model, out) - E0) < 1e-5 * abs(E0)
