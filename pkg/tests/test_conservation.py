import numpy as np
import pytest

import support as S
from msgas import conservation as cons
from msgas import dynamics as dyn
from msgas import geometry as geo
from msgas import multisymplectic as ms
from msgas import thermo as th


@pytest.fixture(scope="module")
def evolved_2d():
    """Standard 2D scenario with gravity at t=0.1 on 32 and 64 points."""
    out = {}
    for N in (32, 64):
        model, s0 = S.smooth(2, N, dyn.UniformPotential(S.GRAVITY[2]))
        out[N] = (model, s0, S.evolve(model, s0, 0.1, S.dt_for(N)))
    return out


@pytest.fixture(scope="module")
def evolved_3d():
    out = {}
    for N in (16, 32):
        model, s0 = S.smooth(3, N, dyn.UniformPotential(S.GRAVITY[3]))
        out[N] = (model, s0, S.evolve(model, s0, 0.05, S.dt_for(N)))
    return out


def _converges(f, data, p=4):
    (N1, a), (N2, b) = sorted(data.items())
    e1, e2 = f(*a), f(*b)
    assert e2 > 0, "no signal left to measure"
    assert e1 / e2 >= S.required_ratio(N1, N2, p), (e1, e2)


# --------------------------------------------------------------------------
# exact cases


@pytest.mark.parametrize("n, N", [(2, 16), (3, 8)])
def test_translation_zeroes_every_law(n, N):
    model, s0 = S.translation(n, N)
    st = S.evolve(model, s0, 0.1, 0.01)
    for rec in cons.all_diagnostics(model, st, s0):
        assert rec.norm_max < 1e-12, rec.name
        assert rec.t == pytest.approx(0.1)


def test_free_fall_zeroes_every_law():
    model = S.model(2, 16, dyn.UniformPotential([0.2, 0.7]))
    s0 = dyn.init_clebsch(model, S="0.1")
    st = S.evolve(model, s0, 0.3, 0.01)
    for rec in cons.all_diagnostics(model, st, s0):
        assert rec.norm_max < 1e-12, rec.name


def test_two_dimensional_helicity_is_identically_zero():
    model, st = S.smooth(2, 16)
    assert np.all(cons.helicity_density(model, st) == 0.0)
    assert cons.helicity_residual(model, st).norm_max == 0.0


def test_advected_invariants_start_at_zero():
    model, st = S.smooth(3, 8)
    assert np.all(cons.symplecticity_mm_invariant(model, st, 0, 2).drift == 0.0)
    assert np.all(cons.ertel_pv(model, st).drift == 0.0)
    assert cons.vorticity_drift_residual(model, st).norm_max == 0.0
    with pytest.raises(ValueError):
        cons.symplecticity_mm_invariant(model, st, 1, 0)


def test_entropy_term_drops_out_of_ertel_pv():
    """(grad r x grad S) . grad S = 0, so the corrected and classical q coincide."""
    model, st = S.smooth(3, 12)
    q, qc = cons.ertel_fields(model, st)
    assert S.max_abs(q - qc) < 1e-13 * (1 + S.max_abs(q))
    kin = dyn.Kinematics(model, st)
    gr = geo.eulerian_gradient(model.grid, st.r, kin.y)
    gS = geo.eulerian_gradient(model.grid, st.S, kin.y)
    assert S.max_abs(geo.dot(geo.cross(gr, gS), gS)) < 1e-15


def test_mm_invariant_with_two_dimensional_base_vectors():
    """For n=2, (e_1 x e_2) . Omega is J times the z vorticity."""
    model, st = S.smooth(2, 16)
    kin = dyn.Kinematics(model, st)
    I = cons.mm_invariant_field(model, st, 0, 1)
    np.testing.assert_allclose(I, kin.J * cons.corrected_vorticity(model, st), atol=1e-14)
    np.testing.assert_allclose(cons.ertel_fields(model, st)[0], I, atol=1e-14)


def test_bernoulli_holds_to_roundoff(evolved_2d):
    model, _, st = evolved_2d[64]
    rec = cons.bernoulli_residual(model, st)
    assert rec.norm_max < 1e-12
    assert abs(rec.extra["mean"]) < 1e-12


def test_clebsch_oracle_decomposition(evolved_2d):
    model, _, st = evolved_2d[32]
    rec = cons.clebsch_oracle_residual(model, st)
    assert rec.extra["commutator"] < 1e-12
    assert rec.extra["lin_mu"] == 0.0 and rec.extra["lin_lamt"] == 0.0


@pytest.mark.parametrize("key", ["terms_gap", "continuity", "primitive_form"])
def test_clebsch_oracle_reduction_converges(evolved_2d, key):
    """The term split uses continuum product rules, so it holds to truncation order."""
    _converges(lambda m, s0, st: cons.clebsch_oracle_residual(m, st).extra[key], evolved_2d)


def test_lin_terms_vanish_without_lin_pairs():
    model = S.model(2, 16)
    st = dyn.init_clebsch(model, **{k: v for k, v in S.SMOOTH_2D.items() if k not in ("lamt", "mu")})
    st = S.evolve(model, st, 0.05, 0.01)
    rec = cons.clebsch_oracle_residual(model, st)
    assert rec.extra["lin_mu"] == 0.0 and rec.extra["lin_lamt"] == 0.0
    assert S.max_abs(cons.lin_vorticity(model, st)) == 0.0


def test_mm_flux_divergence_is_roundoff_on_arbitrary_fields():
    grid = geo.LabelGrid.uniform(3, 12)
    model = dyn.GasModel(grid, th.ThermoModel())
    rng = np.random.default_rng(5)
    m = grid.coords * 2 * np.pi
    disp = 0.03 * np.stack([np.sin(m[1] + m[2]), np.cos(m[0] - m[2]), np.sin(m[0] + 2 * m[1])])
    st = dyn.SimState(0.0, disp, rng.standard_normal((3,) + grid.shape), 0.3 * np.sin(m[0] * m[1] / 6),
                      np.zeros(grid.shape), np.zeros(grid.shape), np.zeros((0,) + grid.shape),
                      np.zeros((0,) + grid.shape), np.eye(3), np.zeros(3))
    for a, b in ((0, 1), (0, 2), (1, 2)):
        assert S.max_abs(cons.mm_flux_divergence(model, st, a, b)) < 1e-10


def test_record_bookkeeping(evolved_2d):
    model, s0, st = evolved_2d[32]
    rec = cons.energy_law_residual(model, st)
    assert rec.extra["total_energy"] == cons.total_energy(model, st)
    assert rec.norm_l2 <= rec.norm_max
    drag = cons.vorticity_dragging_residual(model, st, s0)
    assert drag.extra["drift_max"] == cons.vorticity_drift_residual(model, st, s0).norm_max
    row = cons.diagnostic_row(model, st, s0)
    assert row[0] == st.t and len(row) == len(cons.LAWS) + 1
    with pytest.raises(KeyError):
        cons.evaluate_law("momentum", model, st)


def test_threaded_row_is_identical(evolved_2d):
    model, s0, st = evolved_2d[32]
    assert cons.diagnostic_row(model, st, s0, threads=4) == cons.diagnostic_row(model, st, s0, threads=1)


# --------------------------------------------------------------------------
# truncation-level laws converge at fourth order


@pytest.mark.parametrize("name", ["energy", "eulerian_energy", "mass_translation", "symplecticity_tm",
                                  "clebsch_reconstruction", "clebsch_oracle", "vorticity_dragging"])
def test_laws_converge_with_gravity(evolved_2d, name):
    _converges(lambda m, s0, st: cons.evaluate_law(name, m, st, s0).norm_max, evolved_2d)


@pytest.mark.parametrize("key", ["equivalence_gap"])
def test_mass_translation_equivalence_converges(evolved_2d, key):
    _converges(lambda m, s0, st: cons.mass_translation_residual(m, st).extra[key], evolved_2d)


def test_bernoulli_gradient_matches_mass_translation(evolved_2d):
    _converges(lambda m, s0, st: cons.bernoulli_residual(m, st).extra["gap_vs_mass_translation"], evolved_2d)


def test_mm_label_and_eulerian_forms_agree(evolved_2d, evolved_3d):
    """Cross products of base vectors reproduce the label brackets exactly, stencil for stencil."""
    for data, pairs in ((evolved_2d, [(0, 1)]), (evolved_3d, [(0, 1), (0, 2), (1, 2)])):
        for model, _, st in data.values():
            for a, b in pairs:
                gap = cons.mm_invariant_field(model, st, a, b) - cons.mm_invariant_label_field(model, st, a, b)
                assert S.max_abs(gap) < 1e-13


def test_eulerian_energy_is_label_energy_over_J(evolved_2d):
    def gap(m, s0, st):
        J = dyn.Kinematics(m, st).J
        return S.max_abs(cons.energy_law_field(m, st) - J * cons.eulerian_energy_field(m, st))

    _converges(gap, evolved_2d)


def test_helicity_label_form_matches_eulerian_form(evolved_3d):
    def gap(m, s0, st):
        J = dyn.Kinematics(m, st).J
        return S.max_abs(cons.helicity_field(m, st) - J * cons.helicity_eulerian_field(m, st))

    _converges(gap, evolved_3d)


@pytest.mark.parametrize("name", ["symplecticity_mm", "ertel_pv", "helicity", "clebsch_oracle"])
def test_laws_converge_in_3d(evolved_3d, name):
    _converges(lambda m, s0, st: cons.evaluate_law(name, m, st, s0).norm_max, evolved_3d)


# --------------------------------------------------------------------------
# off-shell identity


def test_offshell_constant_fields():
    lay = ms.ZLayout(2, 1)
    f = cons.random_spacetime_fields(lay, (8, 8, 8), seed=0, amplitude=0.0)
    lhs, rhs = cons.offshell_sides(f, 0, 2, th.ThermoModel())
    assert S.max_abs(lhs) == 0.0 and S.max_abs(rhs) == 0.0


def test_offshell_sides_are_order_one_but_agree():
    lay = ms.ZLayout(2, 0)
    f = cons.random_spacetime_fields(lay, (32, 32, 32), seed=9)
    rec = cons.offshell_compatibility(f, 1, 2, th.ThermoModel())
    assert rec.extra["lhs_max"] > 1.0
    assert rec.norm_max < 0.1 * rec.extra["lhs_max"]
