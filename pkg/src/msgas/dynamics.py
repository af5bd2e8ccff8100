"""Lagrangian gas dynamics in mass coordinates.

Evolved fields are the map ``x = B m + disp``, the velocity ``u``, the
entropy-conjugate potential ``r`` and the Bernoulli potential ``phi``:

    dx/dt   = u
    du/dt   = -d/dm^k (p A_ik) - dPhi/dx^i
    dr/dt   = -T
    dphi/dt = u^2/2 - w - Phi

Entropy ``S`` and the Lin pairs ``(lamt, mu)`` are per-particle constants and
are never touched. ``phi`` may carry a part linear in the labels
(``phi_lin . m``) so that uniform gravity keeps the stored part periodic.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from . import thermo as th
from .expr import Expression

log = logging.getLogger(__name__)

COMPLEX_STEP = 1e-20


# --------------------------------------------------------------------------
# external potential


class Potential:
    """External gravitational potential Phi(x)."""

    kind = "zero"

    def value(self, x):
        return np.zeros(np.shape(x)[1:])

    def gradient(self, x):
        return np.zeros(np.shape(x))

    def split(self, x_bg, disp):
        """Return ``(periodic part on the grid, label-linear coefficient)``."""
        return self.value(disp) * 0.0, np.zeros(x_bg.shape[0])

    def describe(self):
        return {"kind": self.kind}


class ZeroPotential(Potential):
    pass


class UniformPotential(Potential):
    """``Phi = g . x``."""

    kind = "uniform"

    def __init__(self, g):
        self.g = np.asarray(g, dtype=float)

    def _g(self, x):
        return self.g.reshape((-1,) + (1,) * (np.ndim(x) - 1))

    def value(self, x):
        return np.sum(self._g(x) * x, axis=0)

    def gradient(self, x):
        return np.broadcast_to(self._g(x), np.shape(x)) + 0.0 * x

    def split(self, x_bg, disp):
        return self.value(disp), x_bg.T @ self.g

    def describe(self):
        return {"kind": self.kind, "g": self.g.tolist()}


class ExpressionPotential(Potential):
    """Potential given by a mini-language expression in ``x1..xn``.

    The expression must be periodic on the physical box spanned by the map.
    """

    kind = "expression"

    def __init__(self, text, n):
        self.text = text
        self.n = n
        allowed = [f"x{i + 1}" for i in range(n)]
        self.expr = Expression(text, allowed)
        self.grad_exprs = [self.expr.derivative(name) for name in allowed]

    def _env(self, x):
        return {f"x{i + 1}": x[i] for i in range(self.n)}

    def value(self, x):
        return self.expr(**self._env(x)) + 0.0 * x[0]

    def gradient(self, x):
        env = self._env(x)
        return np.stack([g(**env) + 0.0 * x[0] for g in self.grad_exprs])

    def split(self, x_bg, disp):
        raise NotImplementedError("use value() with full positions")

    def describe(self):
        return {"kind": self.kind, "expr": self.text}


# --------------------------------------------------------------------------
# model and state


@dataclass(frozen=True)
class GasModel:
    grid: geo.LabelGrid
    thermo: th.ThermoModel
    potential: Potential = field(default_factory=ZeroPotential)

    @property
    def n(self):
        return self.grid.n


@dataclass
class SimState:
    t: float
    disp: np.ndarray
    u: np.ndarray
    S: np.ndarray
    r: np.ndarray
    phi: np.ndarray
    lamt: np.ndarray
    mu: np.ndarray
    x_bg: np.ndarray
    phi_lin: np.ndarray

    @property
    def K_lin(self):
        return self.lamt.shape[0]

    def positions(self, grid):
        m = grid.coords
        return np.einsum("ij,j...->i...", self.x_bg, m) + self.disp

    def copy(self):
        return dataclasses.replace(
            self,
            **{f.name: np.array(getattr(self, f.name)) for f in dataclasses.fields(self) if f.name != "t"},
        )

    def advanced(self, rates, h):
        """The state moved by ``h * rates``; frozen fields are shared, not copied."""
        return dataclasses.replace(
            self,
            disp=self.disp + h * rates.disp,
            u=self.u + h * rates.u,
            r=self.r + h * rates.r,
            phi=self.phi + h * rates.phi,
            phi_lin=self.phi_lin + h * rates.phi_lin,
        )


@dataclass
class StateRates:
    disp: np.ndarray
    u: np.ndarray
    r: np.ndarray
    phi: np.ndarray
    phi_lin: np.ndarray

    def combine(self, others_and_weights):
        out = {}
        for name in ("disp", "u", "r", "phi", "phi_lin"):
            out[name] = sum(w * getattr(o, name) for o, w in others_and_weights)
        return StateRates(**out)


class Kinematics:
    """Map-derived quantities of one state, computed once and shared."""

    def __init__(self, model, state):
        grid = model.grid
        self.xg = geo.deformation_gradient(grid, state.disp, state.x_bg)
        self.J = geo.check_jacobian(geo.jacobian(self.xg))
        self.A = geo.cofactor(self.xg)
        self.rho = 1.0 / self.J
        self.tp = th.eval_thermo(model.thermo, self.rho, state.S)
        self.x = state.positions(grid)
        self._y = None

    @property
    def y(self):
        if self._y is None:
            self._y = np.swapaxes(self.A, 0, 1) / self.J
        return self._y

    @property
    def p(self):
        return self.tp.p


def potential_value(model, state, kin=None):
    x = kin.x if kin is not None else state.positions(model.grid)
    return model.potential.value(x)


def potential_gradient(model, state, kin=None):
    x = kin.x if kin is not None else state.positions(model.grid)
    return model.potential.gradient(x)


def potential_label_gradient(model, state, kin):
    """``dPhi/dm^i = Phi_k x_ki`` by the chain rule (valid for non-periodic Phi)."""
    gphi = potential_gradient(model, state, kin)
    return np.einsum("k...,ki...->i...", gphi, kin.xg)


def momentum_rhs(model, state, kin=None):
    kin = kin or Kinematics(model, state)
    grid = model.grid
    flux_div = sum(grid.d(kin.p * kin.A[:, k], k) for k in range(grid.n))
    return -flux_div - potential_gradient(model, state, kin)


def _phi_rates(model, state, kin):
    ke = 0.5 * np.sum(state.u * state.u, axis=0)
    pot = model.potential
    if isinstance(pot, ExpressionPotential) or pot.kind == "zero":
        per, lin = pot.value(kin.x), np.zeros(model.n)
    else:
        per, lin = pot.split(state.x_bg, state.disp)
    return ke - kin.tp.w - per, -lin


def full_rhs(model, state, kin=None):
    kin = kin or Kinematics(model, state)
    phi_t, phi_lin_t = _phi_rates(model, state, kin)
    return StateRates(
        disp=state.u,
        u=momentum_rhs(model, state, kin),
        r=-kin.tp.T,
        phi=phi_t,
        phi_lin=phi_lin_t + 0 * state.phi_lin,
    )


def material_derivative(model, fn, state, rates=None, h=COMPLEX_STEP):
    """Exact Lagrangian time derivative of ``fn(state)`` by complex step.

    ``fn`` must be built from complex-analytic operations. The result equals
    the chain-rule derivative along ``full_rhs`` to rounding error.
    """
    if rates is None:
        rates = full_rhs(model, state)
    return np.imag(fn(state.advanced(rates, 1j * h))) / h


# --------------------------------------------------------------------------
# time stepping


def step(model, state, dt, integrator="rk4"):
    if dt == 0:
        return state.copy()
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if integrator == "rk4":
        k1 = full_rhs(model, state)
        k2 = full_rhs(model, state.advanced(k1, dt / 2))
        k3 = full_rhs(model, state.advanced(k2, dt / 2))
        k4 = full_rhs(model, state.advanced(k3, dt))
        incr = k1.combine([(k1, 1 / 6), (k2, 1 / 3), (k3, 1 / 3), (k4, 1 / 6)])
        new = state.advanced(incr, dt)
    elif integrator == "leapfrog":
        new = _leapfrog(model, state, dt)
    else:
        raise ValueError(f"unknown integrator {integrator!r}")
    new.t = state.t + dt
    return new


def _leapfrog(model, state, dt):
    u_half = state.u + 0.5 * dt * momentum_rhs(model, state)
    mid = dataclasses.replace(state, disp=state.disp + 0.5 * dt * u_half, u=u_half)
    kin_mid = Kinematics(model, mid)
    phi_t, phi_lin_t = _phi_rates(model, mid, kin_mid)
    disp_new = state.disp + dt * u_half
    moved = dataclasses.replace(state, disp=disp_new, u=u_half)
    u_new = u_half + 0.5 * dt * momentum_rhs(model, moved)
    return dataclasses.replace(
        state,
        disp=disp_new,
        u=u_new,
        r=state.r - dt * kin_mid.tp.T,
        phi=state.phi + dt * phi_t,
        phi_lin=state.phi_lin + dt * phi_lin_t,
    )


# --------------------------------------------------------------------------
# initialization


class PeriodicityError(ValueError):
    pass


def label_field(grid, expr, allow_linear=False, t=0.0, tol=1e-9):
    """Evaluate an expression in the labels and split off a linear part.

    Returns ``(periodic values, linear coefficients a)`` with
    ``f(m) = periodic(m) + a . m``. A linear part is an error unless
    ``allow_linear``; any other non-periodicity is always an error.
    """
    if not isinstance(expr, Expression):
        expr = Expression(str(expr), [f"m{i + 1}" for i in range(grid.n)] + ["t"])
    m = grid.coords
    env = {f"m{i + 1}": m[i] for i in range(grid.n)}
    env["t"] = t
    f = np.asarray(expr(**env), dtype=float) + np.zeros(grid.shape)
    a = np.zeros(grid.n)
    scale = 1.0 + float(np.max(np.abs(f)))
    for j, L in enumerate(grid.lengths):
        shifted = dict(env)
        shifted[f"m{j + 1}"] = m[j] + L
        jump = np.asarray(expr(**shifted), dtype=float) - f
        mean = float(np.mean(jump))
        if np.max(np.abs(jump - mean)) > tol * scale:
            raise PeriodicityError(
                f"expression {expr.text!r} is not periodic in m{j + 1} up to a linear part"
            )
        if abs(mean) > tol * scale:
            if not allow_linear:
                raise PeriodicityError(
                    f"expression {expr.text!r} must be periodic in m{j + 1}"
                )
            a[j] = mean / L
    periodic = f - np.einsum("j,j...->...", a, m)
    return periodic, a


def clebsch_velocity(model, disp, x_bg, phi, phi_lin, r, S, lamt, mu):
    """``u = grad phi - r grad S - sum_k lamt_k grad mu_k`` through the map."""
    grid = model.grid
    xg = geo.deformation_gradient(grid, disp, x_bg)
    y = geo.inverse_gradient(xg, geo.jacobian(xg))
    dphi = grid.grad(phi) + phi_lin.reshape((-1,) + (1,) * grid.n)
    grad_phi = np.einsum("jk...,j...->k...", y, dphi)
    u = grad_phi - r * geo.eulerian_gradient(grid, S, y)
    for k in range(lamt.shape[0]):
        u = u - lamt[k] * geo.eulerian_gradient(grid, mu[k], y)
    return u


def _lin_fields(grid, exprs, K_lin, name):
    if exprs is None:
        exprs = ["0"] * K_lin
    if isinstance(exprs, str):
        exprs = [exprs]
    if len(exprs) != K_lin:
        raise ValueError(f"{name}: expected {K_lin} expressions, got {len(exprs)}")
    vals = [label_field(grid, e)[0] for e in exprs]
    return np.array(vals).reshape((K_lin,) + grid.shape)


def init_clebsch(model, displacement=None, phi="0", r="0", S="0", lamt=None, mu=None,
                 K_lin=1, velocity=None):
    """Build the t=0 state from label-space expressions.

    ``displacement`` lists one expression per component (default zero); a
    linear part becomes the constant background strain. Unless ``velocity``
    expressions are given, ``u`` is assembled from the Clebsch potentials.
    """
    grid = model.grid
    n = grid.n
    displacement = displacement or ["0"] * n
    if len(displacement) != n:
        raise ValueError(f"displacement needs {n} components")
    disp = np.empty((n,) + grid.shape)
    x_bg = np.eye(n)
    for i, e in enumerate(displacement):
        disp[i], a = label_field(grid, e, allow_linear=True)
        x_bg[i] += a
    phi_per, phi_lin = label_field(grid, phi, allow_linear=True)
    r0 = label_field(grid, r)[0]
    S0 = label_field(grid, S)[0]
    lamt0 = _lin_fields(grid, lamt, K_lin, "lamt")
    mu0 = _lin_fields(grid, mu, K_lin, "mu")
    if velocity is None:
        u0 = clebsch_velocity(model, disp, x_bg, phi_per, phi_lin, r0, S0, lamt0, mu0)
    else:
        if len(velocity) != n:
            raise ValueError(f"velocity needs {n} components")
        u0 = np.stack([label_field(grid, e)[0] for e in velocity])
    state = SimState(0.0, disp, u0, S0, r0, phi_per, lamt0, mu0, x_bg, phi_lin)
    geo.check_jacobian(Kinematics(model, state).J)
    for arr in (state.S, state.lamt, state.mu):
        arr.setflags(write=False)
    return state


def clebsch_residual(model, state):
    """Pointwise ``u - (grad phi - r grad S - lamt grad mu)`` as a vector field."""
    return state.u - clebsch_velocity(
        model, state.disp, state.x_bg, state.phi, state.phi_lin,
        state.r, state.S, state.lamt, state.mu,
    )


# --------------------------------------------------------------------------
# driver


@dataclass
class RunResult:
    state: object
    initial: object
    rows: list
    steps: int
    error: str = None
    monitors: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)


def monitors(model, state):
    kin = Kinematics(model, state)
    G = geo.velocity_gradient(model.grid, state.u, kin.y)
    return {"t": state.t, "min_J": float(np.min(kin.J)), "max_grad_u": float(np.max(np.abs(G)))}


def run(model, state, dt, t_end, integrator="rk4", diagnostics=None, cadence=1,
        keep=False, progress=None):
    """Advance ``state`` to ``t_end``.

    ``diagnostics(state)`` is called at t0, every ``cadence`` steps and at the
    final time; its return values are collected in ``rows``. A singular map
    stops the run and the rows gathered so far are kept.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t_end < state.t:
        raise ValueError("t_end precedes the initial time")
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    t0 = state.t
    nsteps = max(0, math.ceil((t_end - t0) / dt - 1e-9))
    initial = state
    rows, mons, trajectory = [], [], []

    def record(s):
        if diagnostics is not None:
            rows.append(diagnostics(s))
        mons.append(monitors(model, s))
        if keep:
            trajectory.append(s)

    record(state)
    k = 0
    try:
        for k in range(1, nsteps + 1):
            t_next = t_end if k == nsteps else t0 + k * dt
            state = step(model, state, t_next - state.t, integrator)
            state.t = t_next
            if k % cadence == 0 or k == nsteps:
                record(state)
            if progress:
                progress(k, nsteps)
    except geo.SingularMapError as exc:
        log.error("run aborted at step %d: %s", k, exc)
        return RunResult(state, initial, rows, k - 1, str(exc), mons, trajectory)
    return RunResult(state, initial, rows, nsteps, None, mons, trajectory)
