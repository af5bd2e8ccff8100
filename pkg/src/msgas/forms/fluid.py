"""The gas-dynamics forms: Theta, its Cartan form, the beta ideal and its closure.

Coordinates are ``t, m1..mn`` followed by the Lin-free fiber slots of
:class:`msgas.multisymplectic.ZLayout` (``x1.., u1.., pi_ij, S, r, x_ij``).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import dynamics as dyn
from .. import multisymplectic as ms
from .. import runtime
from . import exterior as ex
from . import scalar as sc


def fluid_coords(n):
    layout = ms.ZLayout(n, 0)
    base = ["t"] + [f"m{k + 1}" for k in range(n)]
    return ex.CoordSystem(base + layout.names, n_base=n + 1)


def potential_expr(potential, n):
    """Symbolic ``Phi(x1..xn)`` for a dynamics potential."""
    if potential is None or potential.kind == "zero":
        return sc.ZERO
    if potential.kind == "uniform":
        return sc.add(*(sc.mul(float(g), sc.sym(f"x{i + 1}")) for i, g in enumerate(potential.g)))
    if potential.kind == "expression":
        return sc.from_ast(potential.expr.ast)
    raise ValueError(f"no symbolic form for potential {potential.kind!r}")


class FluidForms:
    """All forms for one dimension, thermodynamic model and potential."""

    def __init__(self, n, thermo, phi=None):
        self.n = n
        self.thermo = thermo
        self.layout = ms.ZLayout(n, 0)
        self.coords = fluid_coords(n)
        self.prims = sc.ThermoPrims(thermo)
        self.phi = sc.ZERO if phi is None else sc.as_expr(phi)
        c = self.coords
        lay = self.layout
        nm = lay.names
        self.x = [c[nm[i]] for i in lay.x]
        self.u = [c[nm[i]] for i in lay.u]
        self.pi = [[c[nm[lay.pi[i, j]]] for j in range(n)] for i in range(n)]
        self.X = [[c[nm[lay.X[i, j]]] for j in range(n)] for i in range(n)]
        self.S = c["S"]
        self.r = c["r"]
        self.tau = sc.det(self.X)
        self.A = sc.cofactor(self.X)
        self.P = self.prims.p(self.tau, self.S)
        self._dV = None

    # base forms ---------------------------------------------------------
    def dt(self):
        return self.coords.d("t")

    def dm(self, mu):
        return self.coords.d("t" if mu == 0 else f"m{mu}")

    def volume(self):
        if self._dV is None:
            self._dV = ex.wedge_all([self.dm(mu) for mu in range(self.n + 1)])
        return self._dV

    def dm_tilde(self, mu):
        """``d/dm^mu _| dV``."""
        name = "t" if mu == 0 else f"m{mu}"
        return ex.contraction({name: sc.ONE}, self.volume())

    def dm_tilde_explicit(self, mu):
        """``(-1)^mu dm^0 ^ .. (omit mu) .. ^ dm^n``."""
        others = [self.dm(a) for a in range(self.n + 1) if a != mu]
        return ex.wedge_all(others).scale((-1.0) ** mu)

    # Hamiltonian and one-forms -------------------------------------------
    def hamiltonian(self):
        n = self.n
        ke = sc.mul(0.5, sc.add(*(sc.power(u, 2) for u in self.u)))
        work = sc.add(*(sc.mul(self.pi[i][k], self.X[i][k]) for i in range(n) for k in range(n)))
        return sc.add(ke, self.prims.e(self.tau, self.S), self.phi, work)

    def omega(self, alpha):
        c = self.coords
        n = self.n
        if alpha == 0:
            out = ex.d_scalar(c, self.S).scale(self.r)
            for i in range(n):
                out = out + ex.d_scalar(c, self.x[i]).scale(self.u[i])
            return out
        k = alpha - 1
        out = ex.DifferentialForm(c, 1, {})
        for i in range(n):
            out = out + ex.d_scalar(c, self.x[i]).scale(self.pi[i][k])
        return out

    def theta(self):
        out = self.volume().scale(sc.mul(-1.0, self.hamiltonian()))
        for a in range(self.n + 1):
            out = out + ex.wedge(self.omega(a), self.dm_tilde(a))
        return out

    def cartan(self):
        return ex.exterior_derivative(self.theta())

    def kappa_matrix(self, alpha):
        """Dense coefficient matrix ``K[i, j]`` of ``d omega^alpha = 1/2 K_ij dz^i ^ dz^j``."""
        k = ex.exterior_derivative(self.omega(alpha))
        off = self.coords.n_base
        N = self.layout.N
        M = np.zeros((N, N))
        for (i, j), coeff in k.terms.items():
            v = coeff.value
            M[i - off, j - off] = v
            M[j - off, i - off] = -v
        return M

    # beta forms ---------------------------------------------------------
    def beta_by_slot(self):
        """``beta_p = K^a_pj dz^j ^ dm~_a - dH/dz^p dV`` in z-slot order."""
        K = ms.build_K(self.layout)
        H = self.hamiltonian()
        c = self.coords
        names = self.layout.names
        dtil = [self.dm_tilde(a) for a in range(self.n + 1)]
        out = []
        for p in range(self.layout.N):
            form = self.volume().scale(sc.mul(-1.0, sc.diff(H, names[p])))
            for a in range(self.n + 1):
                for i, j, v in K.entries[a]:
                    if i == p:
                        form = form + ex.wedge(c.d(names[j]), dtil[a]).scale(float(v))
            out.append(form)
        return out

    def beta(self):
        """The ideal with its conventional labels.

        ``mom[j]`` (momentum rows), ``u[j]``, ``jk[j][k]``, ``r`` (the row
        of the ``S`` slot) and ``S`` (the row of the ``r`` slot) and the
        algebraic rows ``mu[k][j]``.
        """
        by = self.beta_by_slot()
        lay = self.layout
        n = self.n
        return {
            "mom": [by[i] for i in lay.x],
            "u": [by[i] for i in lay.u],
            "jk": [[by[lay.pi[j, k]] for k in range(n)] for j in range(n)],
            "r": by[lay.S],
            "S": by[lay.r],
            "mu": [[by[lay.X[k, j]] for j in range(n)] for k in range(n)],
        }

    def constraint_map(self):
        """``pi_ij -> p(tau, S) A_ij`` onto the constraint submanifold."""
        names = self.layout.names
        lay = self.layout
        return {
            names[lay.pi[i, j]]: sc.mul(self.P, self.A[i][j])
            for i in range(self.n) for j in range(self.n)
        }


# --------------------------------------------------------------------------
# identities of the closed ideal


def _wtilde_partials(F, P):
    """Second partials of the pressure-based enthalpy evaluated at ``p = P``."""
    ps = sc.sym("_p")
    W = F.prims.wt(ps, F.S)
    Wp = sc.diff(W, "_p")
    WS = sc.diff(W, "S")
    out = {
        "pp": sc.diff(Wp, "_p"),
        "pS": sc.diff(Wp, "S"),
        "Sp": sc.diff(WS, "_p"),
        "SS": sc.diff(WS, "S"),
    }
    return {k: sc.substitute(v, {"_p": P}) for k, v in out.items()}


def identity_pairs(n, thermo, phi=None):
    """``{label: (lhs, rhs)}`` for every identity of the ideal.

    The first three hold on the whole fiber; the rest are stated on the
    constraint submanifold ``pi = p A`` (labels end in ``@pi=pA``).
    """
    F = FluidForms(n, thermo, phi)
    B = F.beta()
    dt = F.dt()
    dV = F.volume()
    sgn = (-1.0) ** n
    c = F.coords
    out = {}

    # on the full fiber
    for j in range(n):
        xj = f"x{j + 1}"
        rhs = ex.DifferentialForm(c, n + 2, {})
        for s in range(n):
            hess = sc.diff(sc.diff(F.phi, xj), f"x{s + 1}")
            if not hess.is_zero:
                rhs = rhs + ex.wedge(B["u"][s], dt).scale(sc.mul(-sgn, hess))
        out[f"d_beta_mom[{j + 1}]"] = (B["mom"][j].d(), rhs)
    for j in range(n):
        out[f"d_beta_u[{j + 1}]"] = (B["u"][j].d(), ex.wedge(B["mom"][j], dt).scale(sgn))
    out["d_beta_S"] = (B["S"].d(), ex.DifferentialForm(c, n + 2, {}))

    # on pi = p A
    cmap = F.constraint_map()
    P = F.P
    tau = F.tau
    W = _wtilde_partials(F, P)
    dP = ex.d_scalar(c, P)
    dpdV = ex.wedge(dP, dV)
    bS_dt = ex.wedge(B["S"], dt)
    mom = [ex.substitute(b, cmap) for b in B["mom"]]

    out["d_beta_r@pi=pA"] = (
        B["r"].d(),
        (dpdV.scale(W["Sp"]) + bS_dt.scale(sc.mul(sgn, W["SS"]))).scale(-1.0),
    )

    D = sc.add(W["pp"], sc.mul(float(n) / (n - 1), tau, sc.power(P, -1)))
    bracket = bS_dt.scale(W["pS"])
    for i in range(n):
        for j in range(n):
            coeff = sc.mul(F.X[i][j], 1.0 / (n - 1), sc.power(P, -1))
            bracket = bracket + ex.wedge(mom[i], F.dm(j + 1)).scale(coeff)
    out["dp^dV@pi=pA"] = (dpdV, bracket.scale(sc.mul(-sgn, sc.power(D, -1))))

    dtau_dV = ex.wedge(ex.d_scalar(c, tau), dV)
    out["dtau^dV@pi=pA"] = (dtau_dV, dpdV.scale(W["pp"]) + bS_dt.scale(sc.mul(sgn, W["pS"])))

    for j in range(n):
        for k in range(n):
            lhs = ex.substitute(B["jk"][j][k], cmap).d()
            acc = ex.DifferentialForm(c, n + 2, {})
            for i in range(n):
                for s in range(n):
                    acc = acc + ex.wedge(mom[i], F.dm(s + 1)).scale(sc.mul(sgn, F.X[j][s], F.X[i][k]))
            tail = dpdV.scale(sc.add(sc.mul(P, W["pp"]), tau)) + bS_dt.scale(sc.mul(sgn, P, W["pS"]))
            acc = acc + tail.scale(F.X[j][k])
            out[f"d_beta_x[{j + 1}{k + 1}]@pi=pA"] = (lhs, acc.scale(sc.mul(-1.0, sc.power(sc.mul(P, tau), -1))))
    return out, F, D


def sample_fiber(n, thermo, trials, rng, on_constraint=True, max_tries=100000):
    """Random admissible fiber points as a name -> array environment.

    ``x_ij = I + 0.3 U`` with ``U`` uniform on [-1, 1], rejected when
    ``det < 0.2`` and then rescaled so that ``det x_ij = tau(p, S)`` for the
    drawn ``p`` in [0.5, 2] and ``S`` in [-1, 1]. Other coordinates are
    uniform on [-1, 1]; ``pi`` is set to ``p A`` or drawn freely.
    """
    from .. import geometry as geo
    from .. import thermo as th

    layout = ms.ZLayout(n, 0)
    Xs = []
    tries = 0
    while len(Xs) < trials:
        tries += 1
        if tries > max_tries:
            raise RuntimeError("could not draw enough admissible samples")
        X = np.eye(n) + 0.3 * rng.uniform(-1.0, 1.0, (n, n))
        if np.linalg.det(X) >= 0.2:
            Xs.append(X)
    X = np.stack(Xs, axis=-1)  # [i, j, trial]
    p = rng.uniform(0.5, 2.0, trials)
    S = rng.uniform(-1.0, 1.0, trials)
    tau = th.enthalpy_pS(thermo, p, S)[1]
    X = X * (tau / geo.jacobian(X)) ** (1.0 / n)
    A = geo.cofactor(X)
    env = {"t": rng.uniform(-1, 1, trials)}
    for k in range(n):
        env[f"m{k + 1}"] = rng.uniform(-1, 1, trials)
    names = layout.names
    for i in range(n):
        env[names[layout.x[i]]] = rng.uniform(-1, 1, trials)
        env[names[layout.u[i]]] = rng.uniform(-1, 1, trials)
        for j in range(n):
            env[names[layout.X[i, j]]] = X[i, j]
            env[names[layout.pi[i, j]]] = p * A[i, j] if on_constraint else rng.uniform(-1, 1, trials)
    env["S"] = S
    env["r"] = rng.uniform(-1, 1, trials)
    return env, p


@dataclass
class ClosureReport:
    n: int
    trials: int
    residuals: dict
    scales: dict
    tol: float
    extra: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(v <= self.tol for v in self.residuals.values())

    def rows(self):
        return [(k, self.residuals[k], self.scales[k], self.residuals[k] <= self.tol) for k in self.residuals]


def default_test_potential(n):
    """A potential with a non-degenerate Hessian: quadratic plus a sine."""
    x = [sc.sym(f"x{i + 1}") for i in range(n)]
    quad = sc.add(*(sc.mul(0.5 * (i + 1), sc.power(xi, 2)) for i, xi in enumerate(x)))
    cross = sc.mul(0.3, x[0], x[1])
    return sc.add(quad, cross, sc.mul(0.2, sc.sin(sc.add(*x))))


def ideal_closure_check(n, thermo, trials=100, tol=1e-10, seed=0, phi="default", threads=None):
    """Evaluate ``lhs - rhs`` of every identity at random admissible points."""
    if phi == "default":
        phi = default_test_potential(n)
    pairs, F, D = identity_pairs(n, thermo, phi)
    zero_phi_pairs, _, _ = identity_pairs(n, thermo, None)
    for j in range(n):
        pairs[f"d_beta_mom[{j + 1}]|Phi=0"] = zero_phi_pairs[f"d_beta_mom[{j + 1}]"]
    rng = np.random.default_rng(seed)
    env_on, _ = sample_fiber(n, thermo, trials, rng, on_constraint=True)
    env_off, _ = sample_fiber(n, thermo, trials, rng, on_constraint=False)

    def job(item):
        label, (lhs, rhs) = item
        env = env_on if "@" in label else env_off
        diff = lhs - rhs
        return label, diff.max_abs(env), max(lhs.max_abs(env), rhs.max_abs(env))

    workers = runtime.thread_limit() if threads is None else threads
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(job, pairs.items()))
    residuals = {k: r for k, r, _ in results}
    scales = {k: s for k, _, s in results}

    d_vals = D.evaluate(env_on)
    extra = {"D_min": float(np.min(d_vals))}
    # the ideal's closure needs D != 0; the polytropic gas keeps it positive
    residuals["D>0"] = 0.0 if extra["D_min"] > 0 else float(-extra["D_min"]) + 1.0
    scales["D>0"] = extra["D_min"]

    # dd = 0 on the ideal itself and on random forms
    dd = 0.0
    for b in F.beta_by_slot():
        dd = max(dd, ex.exterior_derivative(b.d()).max_abs(env_off))
    for form in random_forms(F.coords, rng, count=6):
        dd = max(dd, ex.exterior_derivative(form.d()).max_abs(env_off))
    residuals["dd=0"] = dd
    scales["dd=0"] = 0.0
    return ClosureReport(n, trials, residuals, scales, tol, extra)


def random_scalar(names, rng, terms=3):
    """A random smooth expression mixing polynomials, exp and sin."""
    out = sc.const(rng.uniform(-1, 1))
    for _ in range(terms):
        a, b = rng.choice(names, 2, replace=False)
        va, vb = sc.sym(a), sc.sym(b)
        kind = rng.integers(3)
        if kind == 0:
            t = sc.mul(va, sc.power(vb, 2))
        elif kind == 1:
            t = sc.sin(sc.add(va, sc.mul(0.5, vb)))
        else:
            t = sc.mul(va, sc.exp(sc.mul(0.3, vb)))
        out = sc.add(out, sc.mul(rng.uniform(-1, 1), t))
    return out


def random_form(coords, degree, rng, terms=3, pool=None):
    names = list(pool or coords.names)
    acc = {}
    for _ in range(terms):
        idx = tuple(sorted(rng.choice(len(coords), degree, replace=False).tolist()))
        acc[idx] = sc.add(acc.get(idx, sc.ZERO), random_scalar(names, rng))
    return ex.DifferentialForm(coords, degree, acc)


def random_forms(coords, rng, count=4, max_degree=3):
    return [random_form(coords, int(rng.integers(0, max_degree + 1)), rng) for _ in range(count)]


# --------------------------------------------------------------------------
# sections: pullback of beta and of the symplecticity forms


def _jet_maps(jet):
    layout = jet.layout
    names = layout.names
    values = {nm: jet.z[s] for s, nm in enumerate(names)}
    derivs = {
        nm: [jet.z_t[s]] + [jet.z_m[k, s] for k in range(layout.n)]
        for s, nm in enumerate(names)
    }
    return values, derivs


def pullback_beta(model, state, time_source="rhs", forms=None):
    """Section pullback of every ``beta_p`` (Lin-free slot order) as ``[N, *grid]``."""
    n = model.n
    F = forms or FluidForms(n, model.thermo, potential_expr(model.potential, n))
    jet = ms.assemble_jet(model, state, ms.ZLayout(n, 0), time_source=time_source)
    values, derivs = _jet_maps(jet)
    return np.stack([
        ex.section_pullback(b, values, derivs, n + 1) + np.zeros(model.grid.shape)
        for b in F.beta_by_slot()
    ])


def theta_pullback(model, state, forms=None):
    """Coefficient of ``dV`` in the section pullback of Theta."""
    n = model.n
    F = forms or FluidForms(n, model.thermo, potential_expr(model.potential, n))
    jet = ms.assemble_jet(model, state, ms.ZLayout(n, 0))
    values, derivs = _jet_maps(jet)
    return ex.section_pullback(F.theta(), values, derivs, n + 1)


def _two_form_component(form, derivs, names, off, b, c):
    """Coefficient of ``dm^b ^ dm^c`` in the pullback of a constant-coefficient 2-form."""
    total = 0.0
    for (i, j), coeff in form.terms.items():
        zi, zj = derivs[names[i - off]], derivs[names[j - off]]
        total = total + coeff.value * (zi[b] * zj[c] - zi[c] * zj[b])
    return total


def symplectic_conservation_form(model, state):
    """Components of ``D_a (section pullback of d omega^a)``.

    Returns ``{"tm": {s: field}, "mm": {(j, s): {"rate", "flux", "residual"}}}``
    with 0-based label axes; ``tm`` matches the dt ^ dm^s law and ``mm``
    splits the dm^j ^ dm^s law into the time derivative of its density and
    the label divergence of its flux.
    """
    n = model.n
    grid = model.grid
    F = FluidForms(n, model.thermo)
    kappas = [F.omega(a).d() for a in range(n + 1)]
    names = F.layout.names
    off = F.coords.n_base
    layout = ms.ZLayout(n, 0)

    def comp(st, alpha, b, c):
        jet = ms.assemble_jet(model, st, layout)
        _, derivs = _jet_maps(jet)
        return _two_form_component(kappas[alpha], derivs, names, off, b, c)

    out = {"tm": {}, "mm": {}}
    for s in range(n):
        rate = dyn.material_derivative(model, lambda st: comp(st, 0, 0, s + 1), state)
        flux = sum(grid.d(comp(state, k + 1, 0, s + 1), k) for k in range(n))
        out["tm"][s] = rate + flux
    for j in range(n):
        for s in range(j + 1, n):
            rate = dyn.material_derivative(model, lambda st: comp(st, 0, j + 1, s + 1), state)
            flux = sum(grid.d(comp(state, k + 1, j + 1, s + 1), k) for k in range(n))
            out["mm"][(j, s)] = {"rate": rate, "flux": flux, "residual": rate + flux}
    return out
