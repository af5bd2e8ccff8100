"""Conservation-law residuals and advected-invariant traces.

Every law is evaluated in the label frame on a single state. Time
derivatives come from the evolution equations: first derivatives by the
chain rule through ``full_rhs``, and derivatives of composite densities by
``dynamics.material_derivative`` (complex step along the flow, exact to
rounding). Label derivatives use the grid stencils, so each residual is
O(dm**fd_order) on smooth solutions.

A potential that is not periodic in the labels (uniform gravity) is never
differenced: wherever ``Phi`` sits inside a flux, the product rule is applied
with the analytic ``grad Phi``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dynamics as dyn
from . import geometry as geo
from . import multisymplectic as ms
from . import thermo as th


@dataclass
class DiagnosticRecord:
    t: float
    name: str
    norm_max: float
    norm_l2: float
    extra: dict = field(default_factory=dict)


@dataclass
class AdvectedInvariantTrace:
    initial: np.ndarray
    current: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def drift(self):
        return self.current - self.initial


def _record(model, state, name, residual, **extra):
    a = np.abs(np.asarray(residual))
    return DiagnosticRecord(
        t=float(state.t),
        name=name,
        norm_max=float(np.max(a)) if a.size else 0.0,
        norm_l2=model.grid.l2(a),
        extra=extra,
    )


def _dot(a, b):
    return np.sum(a * b, axis=0)


def _div_label(grid, F):
    """``dF^k/dm^k`` for a label-frame flux with the index first."""
    return sum(grid.d(F[k], k) for k in range(grid.n))


def _div_eulerian(grid, F, y):
    """``dF^j/dx^j`` through the map."""
    return sum(geo.eulerian_gradient(grid, F[j], y)[j] for j in range(grid.n))


def _phi_grad_m(model, state, kin):
    return dyn.potential_label_gradient(model, state, kin)


# --------------------------------------------------------------------------
# energy


def energy_density(model, state, kin=None):
    """``I0 = u^2/2 + e + Phi`` per unit mass."""
    kin = kin or dyn.Kinematics(model, state)
    return 0.5 * _dot(state.u, state.u) + kin.tp.e + dyn.potential_value(model, state, kin)


def energy_flux(model, state, kin=None):
    """``I^j = p A_kj u^k``."""
    kin = kin or dyn.Kinematics(model, state)
    return kin.p * np.einsum("kj...,k...->j...", kin.A, state.u)


def energy_law_field(model, state):
    kin = dyn.Kinematics(model, state)
    grid = model.grid
    rates = dyn.full_rhs(model, state, kin)
    Du = grid.grad(state.u)
    J_t = np.einsum("ij...,ij...->...", kin.A, Du)
    dI0 = (
        _dot(state.u, rates.u)
        - kin.p * J_t
        + _dot(dyn.potential_gradient(model, state, kin), state.u)
    )
    return dI0 + _div_label(grid, energy_flux(model, state, kin))


def total_energy(model, state):
    return float(np.sum(energy_density(model, state)) * model.grid.cell_volume)


def energy_law_residual(model, state):
    res = energy_law_field(model, state)
    return _record(model, state, "energy", res, total_energy=total_energy(model, state))


def eulerian_energy_field(model, state):
    """Residual of ``dF0/dt + dF^j/dx^j`` with ``F0 = I0/J``, ``F^j = (u^j I0 + x_jk I^k)/J``.

    The potential part ``rho Phi`` of density and flux is split off and
    expanded by the product rule, leaving ``Phi`` times the continuity defect
    plus the work term ``rho u . grad Phi``.
    """
    grid = model.grid
    kin = dyn.Kinematics(model, state)

    def density(s):
        k = dyn.Kinematics(model, s)
        return (energy_density(model, s, k) - dyn.potential_value(model, s, k)) / k.J

    F0 = density(state)
    I0 = energy_density(model, state, kin) - dyn.potential_value(model, state, kin)
    Ik = energy_flux(model, state, kin)
    F = (state.u * I0 + np.einsum("jk...,k...->j...", kin.xg, Ik)) / kin.J
    y = kin.y
    res = (
        dyn.material_derivative(model, density, state)
        - _dot(state.u, geo.eulerian_gradient(grid, F0, y))
        + _div_eulerian(grid, F, y)
    )
    pot = dyn.potential_value(model, state, kin)
    if np.any(pot != 0):
        gpot = dyn.potential_gradient(model, state, kin)
        res = res + pot * continuity_defect(model, state, kin) + kin.rho * _dot(state.u, gpot)
    return res


def continuity_defect(model, state, kin=None):
    """``d rho/dt|_x + div(rho u)`` evaluated through the map."""
    grid = model.grid
    kin = kin or dyn.Kinematics(model, state)
    y = kin.y
    drho = dyn.material_derivative(model, lambda s: 1.0 / dyn.Kinematics(model, s).J, state)
    return (
        drho
        - _dot(state.u, geo.eulerian_gradient(grid, kin.rho, y))
        + _div_eulerian(grid, kin.rho * state.u, y)
    )


def eulerian_energy_residual(model, state):
    return _record(model, state, "eulerian_energy", eulerian_energy_field(model, state))


# --------------------------------------------------------------------------
# label translation (mass-coordinate) law


def mass_translation_field(model, state, i):
    """``d/dt(u^j x_ji + r dS/dm^i) + d/dm^i(w + Phi - u^2/2)``."""
    grid = model.grid
    kin = dyn.Kinematics(model, state)
    rates = dyn.full_rhs(model, state, kin)
    dT0 = (
        _dot(rates.u, kin.xg[:, i])
        + _dot(state.u, grid.d(state.u, i))
        + rates.r * grid.d(state.S, i)
    )
    flux = grid.d(kin.tp.w - 0.5 * _dot(state.u, state.u), i) + _phi_grad_m(model, state, kin)[i]
    return dT0 + flux


def momentum_projection_field(model, state, i):
    """``x_ji (du^j/dt + dPhi/dx^j + (1/rho) dp/dx^j)`` with non-conservative pressure."""
    kin = dyn.Kinematics(model, state)
    u_t = dyn.momentum_rhs(model, state, kin)
    grad_p = geo.eulerian_gradient(model.grid, kin.p, kin.y)
    m = u_t + dyn.potential_gradient(model, state, kin) + kin.J * grad_p
    return _dot(kin.xg[:, i], m)


def mass_translation_residual(model, state, i=None):
    axes = range(model.n) if i is None else [i]
    fields = np.stack([mass_translation_field(model, state, a) for a in axes])
    equiv = np.stack([momentum_projection_field(model, state, a) for a in axes])
    return _record(
        model, state, "mass_translation", fields,
        per_axis=[float(np.max(np.abs(f))) for f in fields],
        equivalence_gap=float(np.max(np.abs(fields - equiv))),
    )


# --------------------------------------------------------------------------
# Bernoulli


def bernoulli_field(model, state):
    """``B = dphi/dt + w + Phi - u^2/2`` with ``dphi/dt`` from the evolution equation."""
    kin = dyn.Kinematics(model, state)
    rates = dyn.full_rhs(model, state, kin)
    m = model.grid.coords
    phi_t = rates.phi + np.einsum("j,j...->...", rates.phi_lin, m)
    return phi_t + kin.tp.w + dyn.potential_value(model, state, kin) - 0.5 * _dot(state.u, state.u)


def bernoulli_residual(model, state):
    B = bernoulli_field(model, state)
    grid = model.grid
    dB = np.stack([grid.d(B, i) for i in range(grid.n)])
    mt = np.stack([mass_translation_field(model, state, i) for i in range(grid.n)])
    return _record(
        model, state, "bernoulli", B - np.mean(B),
        mean=float(np.mean(B)),
        max_grad_B=float(np.max(np.abs(dB))),
        gap_vs_mass_translation=float(np.max(np.abs(mt - dB))),
    )


# --------------------------------------------------------------------------
# symplecticity: dt ^ dm^s components


def _tm_density(model, state, s):
    """``d(u^i, x^i)/d(t, m^s) + d(r, S)/d(t, m^s)``."""
    grid = model.grid
    kin = dyn.Kinematics(model, state)
    rates = dyn.full_rhs(model, state, kin)
    S_t = 0.0 * state.S
    return (
        _dot(rates.u, kin.xg[:, s])
        - _dot(grid.d(state.u, s), rates.disp)
        + rates.r * grid.d(state.S, s)
        - grid.d(state.r, s) * S_t
    )


def _tm_flux(model, state, s):
    """``F^k = d(pi_ik, x^i)/d(t, m^s)`` with ``pi = p A``."""
    grid = model.grid
    kin = dyn.Kinematics(model, state)
    Du = grid.grad(state.u)
    P = kin.p * kin.A
    P_t = ms._pressure_rate(model, state, kin, Du)
    dP_s = grid.d(P, s)
    return np.einsum("ik...,i...->k...", P_t, kin.xg[:, s]) - np.einsum("ik...,i...->k...", dP_s, state.u)


def symplecticity_tm_field(model, state, s):
    D_t = dyn.material_derivative(model, lambda st: _tm_density(model, st, s), state)
    return D_t + _div_label(model.grid, _tm_flux(model, state, s))


def symplecticity_tm_residual(model, state, s=None):
    grid = model.grid
    axes = range(grid.n) if s is None else [s]
    fields = np.stack([symplecticity_tm_field(model, state, a) for a in axes])
    E = energy_law_field(model, state)
    target = np.stack([-grid.d(E, a) for a in axes])
    return _record(
        model, state, "symplecticity_tm", fields,
        per_axis=[float(np.max(np.abs(f))) for f in fields],
        energy_derivative_gap=float(np.max(np.abs(fields - target))),
    )


# --------------------------------------------------------------------------
# symplecticity: dm ^ dm components, Ertel PV, Lie-dragged vorticity


def corrected_vorticity(model, state, kin=None):
    """``Omega = curl u + grad r x grad S`` (scalar z component for n=2)."""
    grid = model.grid
    kin = kin or dyn.Kinematics(model, state)
    y = kin.y
    return geo.curl(grid, state.u, y) + geo.cross(
        geo.eulerian_gradient(grid, state.r, y), geo.eulerian_gradient(grid, state.S, y)
    )


def lin_vorticity(model, state, kin=None):
    """``-sum_k grad lamt_k x grad mu_k``."""
    grid = model.grid
    kin = kin or dyn.Kinematics(model, state)
    out = 0.0
    for k in range(state.K_lin):
        out = out - geo.cross(
            geo.eulerian_gradient(grid, state.lamt[k], kin.y),
            geo.eulerian_gradient(grid, state.mu[k], kin.y),
        )
    if np.ndim(out) == 0:
        shape = grid.shape if grid.n == 2 else (3,) + grid.shape
        out = np.zeros(shape)
    return out


def mm_invariant_field(model, state, a, b, kin=None):
    """``I0_ab = (e_a x e_b) . Omega`` through Eulerian gradients."""
    kin = kin or dyn.Kinematics(model, state)
    e_lo, _ = geo.base_vectors(kin.xg, kin.y)
    c = geo.cross(e_lo[a], e_lo[b]) * corrected_vorticity(model, state, kin)
    return c if model.n == 2 else np.sum(c, axis=0)


def mm_invariant_label_field(model, state, a, b):
    """The same invariant as label Jacobian brackets ``d(u,x)/d(m^a,m^b) + d(r,S)/d(m^a,m^b)``."""
    grid = model.grid
    kin = dyn.Kinematics(model, state)
    du_a, du_b = grid.d(state.u, a), grid.d(state.u, b)
    return (
        _dot(du_a, kin.xg[:, b]) - _dot(du_b, kin.xg[:, a])
        + grid.d(state.r, a) * grid.d(state.S, b) - grid.d(state.r, b) * grid.d(state.S, a)
    )


def mm_flux_divergence(model, state, a, b):
    """``d/dm^k [d_a(p A_ik x_ib) - d_b(p A_ik x_ia)]``; zero for exact derivatives."""
    grid = model.grid
    kin = dyn.Kinematics(model, state)
    P = kin.p * kin.A
    Pb = np.einsum("ik...,i...->k...", P, kin.xg[:, b])
    Pa = np.einsum("ik...,i...->k...", P, kin.xg[:, a])
    flux = grid.d(Pb, a) - grid.d(Pa, b)
    return _div_label(grid, flux)


def _pairs(n):
    return [(a, b) for a in range(n) for b in range(a + 1, n)]


def symplecticity_mm_invariant(model, state, a, b, reference=None):
    if not a < b:
        raise ValueError("need a < b")
    reference = reference if reference is not None else state
    return AdvectedInvariantTrace(
        initial=mm_invariant_field(model, reference, a, b),
        current=mm_invariant_field(model, state, a, b),
        extra={"flux_divergence": float(np.max(np.abs(mm_flux_divergence(model, state, a, b))))},
    )


def symplecticity_mm_residual(model, state, reference=None):
    traces = {(a, b): symplecticity_mm_invariant(model, state, a, b, reference) for a, b in _pairs(model.n)}
    drifts = np.stack([tr.drift for tr in traces.values()])
    return _record(
        model, state, "symplecticity_mm", drifts,
        per_pair={f"{a + 1}{b + 1}": float(np.max(np.abs(tr.drift))) for (a, b), tr in traces.items()},
        flux_divergence=max(tr.extra["flux_divergence"] for tr in traces.values()),
    )


def _label_scalar(state, psi):
    if isinstance(psi, str):
        if psi == "S":
            return state.S
        if psi.startswith("mu"):
            return state.mu[int(psi[2:] or 1) - 1]
        if psi.startswith("lamt"):
            return state.lamt[int(psi[4:] or 1) - 1]
        raise ValueError(f"unknown advected scalar {psi!r}")
    return np.asarray(psi)


def ertel_fields(model, state, psi="S"):
    """Potential vorticity ``q = Omega . grad Psi / rho`` and the classical ``q_c``.

    For n=2 both vorticities are normal to the plane and ``q = Omega_z / rho``.
    """
    grid = model.grid
    kin = dyn.Kinematics(model, state)
    Om = corrected_vorticity(model, state, kin)
    om = geo.curl(grid, state.u, kin.y)
    if grid.n == 2:
        return kin.J * Om, kin.J * om
    gpsi = geo.eulerian_gradient(grid, _label_scalar(state, psi), kin.y)
    return kin.J * _dot(Om, gpsi), kin.J * _dot(om, gpsi)


def ertel_pv(model, state, psi="S", reference=None):
    reference = reference if reference is not None else state
    q0, _ = ertel_fields(model, reference, psi)
    q, qc = ertel_fields(model, state, psi)
    return AdvectedInvariantTrace(q0, q, extra={"q_classical": qc})


def ertel_pv_residual(model, state, psi="S", reference=None):
    tr = ertel_pv(model, state, psi, reference)
    return _record(
        model, state, "ertel_pv", tr.drift,
        q_min=float(np.min(tr.current)), q_max=float(np.max(tr.current)),
    )


def dragged_vorticity(model, state):
    """``Omega^g / rho = J Omega . e^g`` (``J Omega_z`` for n=2)."""
    kin = dyn.Kinematics(model, state)
    Om = corrected_vorticity(model, state, kin)
    if model.n == 2:
        return kin.J * Om
    return kin.J * np.einsum("gi...,i...->g...", kin.y, Om)


def vorticity_dragging_residual(model, state, reference=None):
    reference = reference if reference is not None else state
    kin = dyn.Kinematics(model, state)
    algebraic = corrected_vorticity(model, state, kin) - lin_vorticity(model, state, kin)
    drift = dragged_vorticity(model, state) - dragged_vorticity(model, reference)
    rec = _record(model, state, "vorticity_dragging", algebraic)
    rec.extra["drift_max"] = float(np.max(np.abs(drift)))
    rec.extra["drift_l2"] = model.grid.l2(drift)
    return rec


def vorticity_drift_residual(model, state, reference=None):
    reference = reference if reference is not None else state
    drift = dragged_vorticity(model, state) - dragged_vorticity(model, reference)
    return _record(model, state, "vorticity_drift", drift)


# --------------------------------------------------------------------------
# helicity


def helicity_density(model, state):
    """``h_v / rho = J Omega . (u + r grad S)``; identically zero for n=2."""
    grid = model.grid
    kin = dyn.Kinematics(model, state)
    if grid.n == 2:
        return 0.0 * kin.J
    v = state.u + state.r * geo.eulerian_gradient(grid, state.S, kin.y)
    return kin.J * _dot(corrected_vorticity(model, state, kin), v)


def helicity_field(model, state):
    """Label-frame helicity balance.

    Dividing the Eulerian law
    ``d_t h_v + div(u h_v + Omega (w + Phi - u^2/2)) = 0``
    by ``rho`` along particle paths uses continuity to absorb ``div(u h_v)``:
    ``rho d/dt(h_v/rho) = d_t h_v + div(u h_v)``. With the Piola transform
    ``div G = (1/J) d/dm^k (A_jk G^j)`` and ``1/rho = J`` this gives
    ``R = d/dt(J h_v) + d/dm^k (A_jk Omega^j (w + Phi - u^2/2))``.
    The potential term is expanded by the product rule.
    """
    grid = model.grid
    kin = dyn.Kinematics(model, state)
    if grid.n == 2:
        return 0.0 * kin.J
    Om = corrected_vorticity(model, state, kin)
    G = np.einsum("jk...,j...->k...", kin.A, Om)  # A_jk Omega^j
    bern = kin.tp.w - 0.5 * _dot(state.u, state.u)
    res = dyn.material_derivative(model, lambda s: helicity_density(model, s), state)
    res = res + _div_label(grid, G * bern)
    pot = dyn.potential_value(model, state, kin)
    if np.any(pot != 0):
        res = res + pot * _div_label(grid, G) + _dot(G, _phi_grad_m(model, state, kin))
    return res


def helicity_eulerian_field(model, state):
    """The same law through Eulerian gradients, without the continuity transform."""
    grid = model.grid
    kin = dyn.Kinematics(model, state)
    if grid.n == 2:
        return 0.0 * kin.J
    y = kin.y

    def hv(s):
        k = dyn.Kinematics(model, s)
        return helicity_density(model, s) / k.J

    h = hv(state)
    Om = corrected_vorticity(model, state, kin)
    bern = kin.tp.w - 0.5 * _dot(state.u, state.u)
    F = state.u * h + Om * bern
    res = (
        dyn.material_derivative(model, hv, state)
        - _dot(state.u, geo.eulerian_gradient(grid, h, y))
        + _div_eulerian(grid, F, y)
    )
    pot = dyn.potential_value(model, state, kin)
    if np.any(pot != 0):
        res = res + pot * _div_eulerian(grid, Om, y) + _dot(Om, dyn.potential_gradient(model, state, kin))
    return res


def helicity_residual(model, state):
    return _record(model, state, "helicity", helicity_field(model, state))


# --------------------------------------------------------------------------
# Clebsch representation


def clebsch_reconstruction_residual(model, state):
    return _record(model, state, "clebsch_reconstruction", dyn.clebsch_residual(model, state))


def _phi_label_gradient(model, state, i):
    return model.grid.d(state.phi, i) + state.phi_lin[i]


def _clebsch_momentum(model, state, i):
    """``d phi/dm^i - sum_k lamt_k d mu_k/dm^i``."""
    grid = model.grid
    out = _phi_label_gradient(model, state, i)
    for k in range(state.K_lin):
        out = out - state.lamt[k] * grid.d(state.mu[k], i)
    return out


def clebsch_oracle_fields(model, state, i):
    """Eulerian Clebsch form of the label-translation law and its term split.

    Returns ``(R, terms, R_alt)`` where ``R`` is the residual of
    ``d_t[rho C_i] + div(rho u C_i - rho x_{.i} dphi/dt)`` with
    ``C_i = dphi/dm^i - lamt dmu/dm^i``, ``terms`` are the four pieces it
    reduces to (mixed-partial commutator, continuity factor and the two
    Lin-pair rates), and ``R_alt`` is the primitive-variable law
    ``d_t[rho x_ji (u^j + r dS/dx^j)] + div(...)`` it is equivalent to.
    """
    grid = model.grid
    kin = dyn.Kinematics(model, state)
    y = kin.y
    rho = kin.rho
    rates = dyn.full_rhs(model, state, kin)
    pot = dyn.potential_value(model, state, kin)
    gpot = dyn.potential_gradient(model, state, kin)
    bern = 0.5 * _dot(state.u, state.u) - kin.tp.w  # dphi/dt + Phi
    x_i = kin.xg[:, i]

    def density(s):
        return _clebsch_momentum(model, s, i) / dyn.Kinematics(model, s).J

    C = _clebsch_momentum(model, state, i)
    F0 = rho * C
    F = rho * state.u * C - rho * x_i * bern
    R = (
        dyn.material_derivative(model, density, state)
        - _dot(state.u, geo.eulerian_gradient(grid, F0, y))
        + _div_eulerian(grid, F, y)
        + pot * _div_eulerian(grid, rho * x_i, y) + rho * _dot(x_i, gpot)
    )

    cont = continuity_defect(model, state, kin)
    dphi_m_t = dyn.material_derivative(model, lambda s: _phi_label_gradient(model, s, i), state)
    phi_t_m = grid.d(rates.phi, i) + rates.phi_lin[i]
    zero = np.zeros(grid.shape)
    T1 = rho * (dphi_m_t - phi_t_m)
    T2, T3, T4 = zero.copy(), zero.copy(), zero.copy()
    for k in range(state.K_lin):
        dmu = grid.d(state.mu[k], i)
        T2 = T2 - state.lamt[k] * dmu * cont
        T3 = T3 - rho * state.lamt[k] * grid.d(zero, i)  # d mu/dt = 0 in the label frame
        T4 = T4 - rho * dmu * zero  # d lamt/dt = 0 in the label frame

    def density_alt(s):
        k = dyn.Kinematics(model, s)
        v = s.u + s.r * geo.eulerian_gradient(grid, s.S, k.y)
        return _dot(k.xg[:, i], v) / k.J

    v = state.u + state.r * geo.eulerian_gradient(grid, state.S, y)
    G0 = rho * _dot(x_i, v)
    Galt = state.u * G0 + rho * (kin.tp.w - 0.5 * _dot(state.u, state.u)) * x_i
    R_alt = (
        dyn.material_derivative(model, density_alt, state)
        - _dot(state.u, geo.eulerian_gradient(grid, G0, y))
        + _div_eulerian(grid, Galt, y)
        + pot * _div_eulerian(grid, rho * x_i, y) + rho * _dot(x_i, gpot)
    )
    return R, (T1, T2, T3, T4), R_alt


def clebsch_oracle_residual(model, state):
    Rs, terms, alts = [], [[], [], [], []], []
    for i in range(model.n):
        R, T, R_alt = clebsch_oracle_fields(model, state, i)
        Rs.append(R)
        alts.append(R_alt)
        for k in range(4):
            terms[k].append(T[k])
    R = np.stack(Rs)
    T = [np.stack(t) for t in terms]
    return _record(
        model, state, "clebsch_oracle", R,
        commutator=float(np.max(np.abs(T[0]))),
        continuity=float(np.max(np.abs(T[1]))),
        lin_mu=float(np.max(np.abs(T[2]))),
        lin_lamt=float(np.max(np.abs(T[3]))),
        primitive_form=float(np.max(np.abs(np.stack(alts)))),
        terms_gap=float(np.max(np.abs(R - sum(T)))),
    )


# --------------------------------------------------------------------------
# off-shell compatibility of the label-translation laws


@dataclass
class SpaceTimeFields:
    """Arbitrary fields ``z[slot, t, *labels]`` on a periodic space-time grid."""

    z: np.ndarray
    spacing: tuple  # (dt, dm1, ..., dmn)
    layout: ms.ZLayout
    fd_order: int = 4

    def d(self, f, alpha):
        nb = len(self.spacing)
        axis = np.ndim(f) - nb + alpha
        return geo.periodic_difference(f, axis, self.spacing[alpha], self.fd_order)


def random_spacetime_fields(layout, sizes, lengths=None, seed=0, amplitude=0.1, modes=2, fd_order=4):
    """Smooth periodic non-solution fields with a well-conditioned x_ij block."""
    rng = np.random.default_rng(seed)
    nb = layout.n + 1
    lengths = lengths or (1.0,) * nb
    axes = [np.arange(s) * (L / s) for s, L in zip(sizes, lengths)]
    q = np.meshgrid(*axes, indexing="ij")
    z = np.empty((layout.N,) + tuple(sizes))
    for slot in range(layout.N):
        f = np.full(tuple(sizes), rng.uniform(-0.5, 0.5))
        for _ in range(modes):
            k = rng.integers(-2, 3, size=nb)
            ph = rng.uniform(0, 2 * np.pi)
            arg = sum(2 * np.pi * k[a] * q[a] / lengths[a] for a in range(nb))
            f = f + amplitude * rng.uniform(0.5, 1.0) * np.sin(arg + ph)
        z[slot] = f
    for i in range(layout.n):
        for j in range(layout.n):
            z[layout.X[i, j]] = (1.0 if i == j else 0.0) + 0.5 * (z[layout.X[i, j]] - np.mean(z[layout.X[i, j]]))
    return SpaceTimeFields(z, tuple(L / s for s, L in zip(sizes, lengths)), layout, fd_order)


def _offshell_lagrangian(fields, thermo, potential):
    lay = fields.layout
    z = fields.z
    X = ms._block(z, lay.X)
    u = z[lay.u]
    return 0.5 * _dot(u, u) - th.specific_energy(thermo, geo.jacobian(X), z[lay.S]) - potential.value(z[lay.x])


def offshell_sides(fields, beta, gamma, thermo, potential=None):
    """Both sides of ``D_g G_b - D_b G_g = D_a(K^a_ij z^i_g z^j_b)``."""
    potential = potential or dyn.ZeroPotential()
    lay = fields.layout
    nb = lay.n + 1
    z = fields.z
    zd = [fields.d(z, a) for a in range(nb)]
    Lc = ms.oneform_coefficients(z, lay)
    Lag = _offshell_lagrangian(fields, thermo, potential)

    def G(b):
        return sum(fields.d(np.sum(Lc[a] * zd[b], axis=0), a) for a in range(nb)) - fields.d(Lag, b)

    lhs = fields.d(G(beta), gamma) - fields.d(G(gamma), beta)
    K = ms.build_K(lay)
    rhs = 0.0
    for a in range(nb):
        kappa = sum(v * zd[gamma][i] * zd[beta][j] for i, j, v in K.entries[a])
        rhs = rhs + fields.d(kappa, a)
    return lhs, rhs


def offshell_compatibility(fields, beta, gamma, thermo, potential=None):
    lhs, rhs = offshell_sides(fields, beta, gamma, thermo, potential)
    diff = np.abs(lhs - rhs)
    return DiagnosticRecord(
        t=0.0, name="offshell", norm_max=float(np.max(diff)),
        norm_l2=float(np.sqrt(np.mean(diff**2))),
        extra={"lhs_max": float(np.max(np.abs(lhs))), "rhs_max": float(np.max(np.abs(rhs)))},
    )


# --------------------------------------------------------------------------
# registry


LAWS = (
    "energy",
    "eulerian_energy",
    "mass_translation",
    "bernoulli",
    "symplecticity_tm",
    "symplecticity_mm",
    "ertel_pv",
    "vorticity_dragging",
    "vorticity_drift",
    "helicity",
    "clebsch_reconstruction",
    "clebsch_oracle",
)


def evaluate_law(name, model, state, reference=None):
    if name == "energy":
        return energy_law_residual(model, state)
    if name == "eulerian_energy":
        return eulerian_energy_residual(model, state)
    if name == "mass_translation":
        return mass_translation_residual(model, state)
    if name == "bernoulli":
        return bernoulli_residual(model, state)
    if name == "symplecticity_tm":
        return symplecticity_tm_residual(model, state)
    if name == "symplecticity_mm":
        return symplecticity_mm_residual(model, state, reference)
    if name == "ertel_pv":
        return ertel_pv_residual(model, state, reference=reference)
    if name == "vorticity_dragging":
        return vorticity_dragging_residual(model, state, reference)
    if name == "vorticity_drift":
        return vorticity_drift_residual(model, state, reference)
    if name == "helicity":
        return helicity_residual(model, state)
    if name == "clebsch_reconstruction":
        return clebsch_reconstruction_residual(model, state)
    if name == "clebsch_oracle":
        return clebsch_oracle_residual(model, state)
    raise KeyError(f"unknown law {name!r}")


def all_diagnostics(model, state, reference=None, laws=LAWS):
    return [evaluate_law(name, model, state, reference) for name in laws]


def diagnostic_row(model, state, reference=None, laws=LAWS, threads=1):
    """``[t, norm_max of each law]``; laws may be evaluated on worker threads."""
    if threads > 1 and len(laws) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            recs = list(pool.map(lambda name: evaluate_law(name, model, state, reference), laws))
    else:
        recs = [evaluate_law(name, model, state, reference) for name in laws]
    return [float(state.t)] + [r.norm_max for r in recs]
