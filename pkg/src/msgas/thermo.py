"""Ideal polytropic gas equation of state.

The internal energy per unit volume is

    eps(rho, S) = A0 * exp(S / c_v) * rho**gamma / (gamma - 1)

from which pressure, temperature and enthalpy follow by differentiation:
``p = rho*eps_rho - eps``, ``rho*T = eps_S`` and ``w = eps_rho``.

All functions accept scalars or numpy arrays, and stay analytic for complex
input so that complex-step derivatives can be pushed through them.
"""

from dataclasses import dataclass

import numpy as np


class ThermoDomainError(ValueError):
    """Raised when a thermodynamic function is evaluated outside its domain."""


@dataclass(frozen=True)
class ThermoModel:
    gamma: float = 1.4
    c_v: float = 1.0
    A0: float = 1.0

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not self.c_v > 0.0:
            raise ValueError(f"c_v must be positive, got {self.c_v}")
        if not self.A0 > 0.0:
            raise ValueError(f"A0 must be positive, got {self.A0}")

    def entropy_factor(self, S):
        """A0 * exp(S / c_v), the pressure scale at unit density."""
        return self.A0 * np.exp(S / self.c_v)


@dataclass(frozen=True)
class ThermoPoint:
    rho: object
    S: object
    p: object
    T: object
    w: object
    e: object
    tau: object


def _require_positive(name, value):
    if np.any(np.real(value) <= 0):
        raise ThermoDomainError(f"{name} must be positive")


def internal_energy_density(model, rho, S):
    """Energy per unit volume eps(rho, S)."""
    _require_positive("rho", rho)
    return model.entropy_factor(S) * rho**model.gamma / (model.gamma - 1.0)


def eval_thermo(model, rho, S):
    """Evaluate every derived quantity at density ``rho`` and entropy ``S``."""
    _require_positive("rho", rho)
    eps = internal_energy_density(model, rho, S)
    return ThermoPoint(
        rho=rho,
        S=S,
        p=model.entropy_factor(S) * rho**model.gamma,
        T=eps / (rho * model.c_v),
        w=model.gamma * eps / rho,
        e=eps / rho,
        tau=1.0 / rho,
    )


def pressure(model, tau, S):
    """Pressure as a function of specific volume."""
    _require_positive("tau", tau)
    return model.entropy_factor(S) * tau ** (-model.gamma)


def specific_energy(model, tau, S):
    """Internal energy per unit mass e(tau, S)."""
    _require_positive("tau", tau)
    return model.entropy_factor(S) * tau ** (1.0 - model.gamma) / (model.gamma - 1.0)


def temperature(model, tau, S):
    return specific_energy(model, tau, S) / model.c_v


def dp_dtau(model, tau, S):
    """Partial of pressure with respect to specific volume at fixed entropy."""
    return -model.gamma * pressure(model, tau, S) / tau


def density_from_pressure(model, p, S):
    _require_positive("p", p)
    return (p / model.entropy_factor(S)) ** (1.0 / model.gamma)


def enthalpy_pS(model, p, S):
    """Enthalpy as a function of pressure and entropy.

    Returns ``(w, tau, T)`` where ``tau`` and ``T`` are the partials of ``w``
    with respect to ``p`` and ``S``.
    """
    rho = density_from_pressure(model, p, S)
    pt = eval_thermo(model, rho, S)
    return pt.w, pt.tau, pt.T


def gibbs_residual(model, rho, S, h, direction=(1.0, 1.0)):
    """Centered-probe defect of ``T dS = de + p dtau`` per unit probe length.

    The probe moves ``tau`` by ``+-h*tau*direction[0]`` and ``S`` by
    ``+-h*direction[1]``. The result is O(h**2) for a consistent EOS.
    """
    _require_positive("rho", rho)
    tau = 1.0 / rho
    dtau = h * tau * direction[0]
    dS = h * direction[1]
    e_plus = specific_energy(model, tau + dtau, S + dS)
    e_minus = specific_energy(model, tau - dtau, S - dS)
    pt = eval_thermo(model, rho, S)
    defect = pt.T * (2 * dS) - ((e_plus - e_minus) + pt.p * (2 * dtau))
    return np.abs(defect) / (2 * h)
