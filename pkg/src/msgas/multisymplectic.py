"""Multi-symplectic form ``K^a z_{,a} = grad_z h`` of Lagrangian gas dynamics.

The state vector ``z`` stacks positions, velocities, the momentum tensor
``pi_ij``, entropy, its conjugate ``r``, the deformation-gradient slots
``x_ij`` and optional Lin pairs ``(mu^k, lam^k)``. Slot order (0-based)::

    x^i       0 .. n-1
    u^i       n .. 2n-1
    pi_ij     2n + n*i + j
    S         n^2 + 2n
    r         n^2 + 2n + 1
    x_ij      n^2 + 2n + 2 + n*i + j
    mu^k      2n^2 + 2n + 2 + 2k
    lam^k     2n^2 + 2n + 3 + 2k

Arrays of z-vectors carry the slot index first: ``z[N, *points]``.
"""

from dataclasses import dataclass

import numpy as np

from . import dynamics as dyn
from . import geometry as geo
from . import thermo as th


@dataclass(frozen=True)
class ZLayout:
    n: int
    K_lin: int = 0

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError(f"unsupported dimension n={self.n}")
        if self.K_lin < 0:
            raise ValueError("K_lin must be non-negative")

    @property
    def N(self):
        return 2 * self.n**2 + 2 * self.n + 2 + 2 * self.K_lin

    @property
    def x(self):
        return list(range(self.n))

    @property
    def u(self):
        return list(range(self.n, 2 * self.n))

    @property
    def pi(self):
        n = self.n
        return np.arange(2 * n, 2 * n + n * n).reshape(n, n)

    @property
    def S(self):
        return self.n**2 + 2 * self.n

    @property
    def r(self):
        return self.n**2 + 2 * self.n + 1

    @property
    def X(self):
        n = self.n
        base = n * n + 2 * n + 2
        return np.arange(base, base + n * n).reshape(n, n)

    @property
    def mu(self):
        base = 2 * self.n**2 + 2 * self.n + 2
        return [base + 2 * k for k in range(self.K_lin)]

    @property
    def lam(self):
        return [m + 1 for m in self.mu]

    @property
    def names(self):
        n = self.n
        out = [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(n)]
        out += [f"pi_{i + 1}{j + 1}" for i in range(n) for j in range(n)]
        out += ["S", "r"]
        out += [f"x_{i + 1}{j + 1}" for i in range(n) for j in range(n)]
        for k in range(self.K_lin):
            out += [f"mu{k + 1}", f"lam{k + 1}"]
        return out

    def index(self, name):
        return self.names.index(name)

    def lin_free(self):
        return ZLayout(self.n, 0)


def build_layout(n, K_lin=0):
    return ZLayout(n, K_lin)


# --------------------------------------------------------------------------
# one-forms and K matrices


def oneform_coefficients(z, layout):
    """Coefficients ``L[a, j]`` of ``omega^a = L^a_j dz^j``."""
    n = layout.n
    L = np.zeros((n + 1,) + z.shape, dtype=z.dtype)
    for i in range(n):
        L[0, layout.x[i]] = z[layout.u[i]]
        for k in range(n):
            L[k + 1, layout.x[i]] = z[layout.pi[i, k]]
    L[0, layout.S] = z[layout.r]
    for mu, lam in zip(layout.mu, layout.lam):
        L[0, mu] = z[lam]
    return L


@dataclass(frozen=True)
class KMatrices:
    layout: ZLayout
    entries: tuple  # per alpha: tuple of (row, col, value), 0-based, skew pairs included

    def dense(self, alpha=None):
        N = self.layout.N
        if alpha is None:
            return np.stack([self.dense(a) for a in range(len(self.entries))])
        K = np.zeros((N, N))
        for i, j, v in self.entries[alpha]:
            K[i, j] = v
        return K

    def one_based(self, alpha):
        """Positive entries as 1-based ``(row, col)`` pairs."""
        return sorted((i + 1, j + 1) for i, j, v in self.entries[alpha] if v > 0)


def build_K(layout):
    """Constant skew matrices with ``K[a][i, j] = dL^a_j/dz^i - dL^a_i/dz^j``."""
    n = layout.n
    pairs = [[] for _ in range(n + 1)]
    for i in range(n):
        pairs[0].append((layout.u[i], layout.x[i]))
        for k in range(n):
            pairs[k + 1].append((layout.pi[i, k], layout.x[i]))
    pairs[0].append((layout.r, layout.S))
    for mu, lam in zip(layout.mu, layout.lam):
        pairs[0].append((lam, mu))
    entries = tuple(
        tuple(sorted([(int(a), int(b), 1) for a, b in P] + [(int(b), int(a), -1) for a, b in P]))
        for P in pairs
    )
    return KMatrices(layout, entries)


def K_from_oneforms(layout, z0=None, h=0.5):
    """K matrices assembled by differencing ``oneform_coefficients``."""
    N = layout.N
    z0 = np.zeros(N) if z0 is None else np.asarray(z0, float)
    dL = np.zeros((layout.n + 1, N, N))  # dL[a, i, j] = dL^a_j / dz^i
    for i in range(N):
        e = np.zeros(N)
        e[i] = h
        dL[:, i, :] = (oneform_coefficients(z0 + e, layout) - oneform_coefficients(z0 - e, layout)) / (2 * h)
    return dL - np.swapaxes(dL, 1, 2)


# --------------------------------------------------------------------------
# Hamiltonian density


def _block(z, idx):
    return np.stack([np.stack([z[idx[i, j]] for j in range(idx.shape[1])]) for i in range(idx.shape[0])])


def hamiltonian_density(z, layout, thermo, potential=None):
    """``h = u^2/2 + e(tau, S) + Phi(x) + pi_ik x_ik`` with ``tau = det(x_ij)``."""
    potential = potential or dyn.ZeroPotential()
    X = _block(z, layout.X)
    P = _block(z, layout.pi)
    tau = geo.jacobian(X)
    if np.any(np.real(tau) <= geo.SINGULAR_J):
        raise geo.SingularMapError(np.argwhere(np.atleast_1d(np.real(tau)) <= geo.SINGULAR_J),
                                   float(np.min(np.real(tau))))
    u = z[layout.u]
    x = z[layout.x]
    return (
        0.5 * np.sum(u * u, axis=0)
        + th.specific_energy(thermo, tau, z[layout.S])
        + potential.value(x)
        + np.sum(P * X, axis=(0, 1))
    )


def grad_h(z, layout, thermo, potential=None):
    """Analytic gradient of ``hamiltonian_density`` with respect to every slot."""
    potential = potential or dyn.ZeroPotential()
    n = layout.n
    X = _block(z, layout.X)
    P = _block(z, layout.pi)
    tau = geo.jacobian(X)
    if np.any(np.real(tau) <= geo.SINGULAR_J):
        raise geo.SingularMapError(np.argwhere(np.atleast_1d(np.real(tau)) <= geo.SINGULAR_J),
                                   float(np.min(np.real(tau))))
    S = z[layout.S]
    p = th.pressure(thermo, tau, S)
    A = geo.cofactor(X)
    g = np.zeros_like(z)
    g[layout.u] = z[layout.u]
    g[layout.x] = potential.gradient(z[layout.x])
    g[layout.S] = th.temperature(thermo, tau, S)
    for i in range(n):
        for j in range(n):
            g[layout.pi[i, j]] = X[i, j]
            g[layout.X[i, j]] = P[i, j] - p * A[i, j]
    return g


# --------------------------------------------------------------------------
# jets and residual


@dataclass
class ZJet:
    """``z`` with its time and label derivatives on every grid point."""

    z: np.ndarray
    z_t: np.ndarray
    z_m: np.ndarray  # [j, slot, *grid]
    layout: ZLayout


def _pressure_rate(model, state, kin, Du):
    J_t = np.einsum("ij...,ij...->...", kin.A, Du)
    p_t = th.dp_dtau(model.thermo, kin.J, state.S) * J_t
    A_t = geo.cofactor_derivative(kin.xg, Du)
    return p_t * kin.A + kin.p * A_t


def assemble_jet(model, state, layout=None, time_source="rhs"):
    """Build the jet of a simulation state with ``pi = p A`` imposed.

    ``time_source="rhs"`` takes ``du/dt`` from the conservative momentum
    equation used by the integrator. ``"eulerian"`` uses the independent
    form ``-(1/rho) grad p - grad Phi`` evaluated through the map.
    """
    layout = layout or ZLayout(model.n, state.K_lin)
    if layout.n != model.n:
        raise ValueError("layout dimension does not match the grid")
    if layout.K_lin not in (0, state.K_lin):
        raise ValueError("layout Lin pairs do not match the state")
    grid = model.grid
    n = grid.n
    kin = dyn.Kinematics(model, state)
    dtype = np.result_type(state.u, state.disp)
    shape = (layout.N,) + grid.shape
    z = np.zeros(shape, dtype)
    z_t = np.zeros(shape, dtype)
    z_m = np.zeros((n,) + shape, dtype)

    Du = grid.grad(state.u)  # [i, j] = du^i/dm^j
    P = kin.p * kin.A
    if time_source == "rhs":
        u_t = dyn.momentum_rhs(model, state, kin)
    elif time_source == "eulerian":
        grad_p = geo.eulerian_gradient(grid, kin.p, kin.y)
        u_t = -kin.J * grad_p - dyn.potential_gradient(model, state, kin)
    else:
        raise ValueError(f"unknown time_source {time_source!r}")

    for i in range(n):
        z[layout.x[i]] = kin.x[i]
        z[layout.u[i]] = state.u[i]
        z_t[layout.x[i]] = state.u[i]
        z_t[layout.u[i]] = u_t[i]
    P_t = _pressure_rate(model, state, kin, Du)
    for i in range(n):
        for j in range(n):
            z[layout.pi[i, j]] = P[i, j]
            z[layout.X[i, j]] = kin.xg[i, j]
            z_t[layout.pi[i, j]] = P_t[i, j]
            z_t[layout.X[i, j]] = Du[i, j]
    z[layout.S] = state.S
    z[layout.r] = state.r
    z_t[layout.r] = -kin.tp.T
    for k, (mu, lam) in enumerate(zip(layout.mu, layout.lam)):
        z[mu] = state.mu[k]
        z[lam] = state.lamt[k]

    for j in range(n):
        dz = grid.d(z, j)
        # positions are not periodic; their label derivative is the deformation gradient
        for i in range(n):
            dz[layout.x[i]] = kin.xg[i, j]
        z_m[j] = dz
    return ZJet(z, z_t, z_m, layout)


def ms_residual(jet, K, thermo, potential=None):
    """``K^0 z_t + sum_k K^k z_{m^k} - grad h`` for every slot and grid point."""
    layout = jet.layout
    out = -grad_h(jet.z, layout, thermo, potential)
    for i, j, v in K.entries[0]:
        out[i] += v * jet.z_t[j]
    for k in range(layout.n):
        for i, j, v in K.entries[k + 1]:
            out[i] += v * jet.z_m[k, j]
    return out


def residual_blocks(res, layout):
    """Max-norm of the residual grouped by slot family."""
    blocks = {
        "x": layout.x,
        "u": layout.u,
        "pi": list(layout.pi.ravel()),
        "S": [layout.S],
        "r": [layout.r],
        "x_ij": list(layout.X.ravel()),
    }
    if layout.K_lin:
        blocks["mu"] = layout.mu
        blocks["lam"] = layout.lam
    return {name: float(np.max(np.abs(res[idx]))) for name, idx in blocks.items()}


# --------------------------------------------------------------------------
# de Donder-Weyl momenta and Legendre transform


def dedonder_momenta(model, state):
    """Multi-momenta conjugate to ``x_t``, ``x_{,j}``, ``S_t`` and ``mu_t``."""
    kin = dyn.Kinematics(model, state)
    return {
        "pi_xt": state.u,
        "pi_xm": kin.p * kin.A,
        "pi_St": state.r,
        "pi_mut": state.lamt,
    }


def lagrangian_density(z, rates, layout, thermo, potential=None):
    """Canonical Lagrangian density expressed through pressure.

    ``rates`` supplies ``x_t``, ``S_t`` and ``mu_t``; the deformation gradient
    is read from the ``x_ij`` slots and ``p`` from ``pi = p A`` via
    ``pi_ij x_ij = n p J``.
    """
    potential = potential or dyn.ZeroPotential()
    n = layout.n
    X = _block(z, layout.X)
    P = _block(z, layout.pi)
    J = geo.jacobian(X)
    p = np.sum(P * X, axis=(0, 1)) / (n * J)
    w, _, _ = th.enthalpy_pS(thermo, p, z[layout.S])
    u = z[layout.u]
    out = (
        z[layout.r] * rates["S_t"]
        + np.sum(u * rates["x_t"], axis=0)
        + p * J
        - (0.5 * np.sum(u * u, axis=0) + w + potential.value(z[layout.x]))
    )
    for k, lam in enumerate(layout.lam):
        out = out + z[lam] * rates["mu_t"][k]
    return out


def momentum_pairing(z, rates, layout):
    """``pi . rates``: momenta contracted with the matching base derivatives."""
    X = _block(z, layout.X)
    P = _block(z, layout.pi)
    out = (
        np.sum(z[layout.u] * rates["x_t"], axis=0)
        + np.sum(P * X, axis=(0, 1))
        + z[layout.r] * rates["S_t"]
    )
    for k, lam in enumerate(layout.lam):
        out = out + z[lam] * rates["mu_t"][k]
    return out
