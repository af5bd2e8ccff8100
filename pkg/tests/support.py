"""Shared scenarios and convergence helpers for the test suite."""

import math

import numpy as np

from msgas import dynamics as dyn
from msgas import geometry as geo
from msgas import thermo as th

# Observed refinement ratio must reach this fraction of the ideal (N2/N1)**p.
ORDER_SAFETY = 0.75

SMOOTH_2D = dict(
    displacement=["0.01*sin(2*pi*m2)", "0.01*cos(2*pi*m1)"],
    phi="0.01*sin(2*pi*m1)*cos(2*pi*m2)",
    r="0.1*cos(2*pi*m1)",
    S="0.05*sin(2*pi*m2)",
    lamt=["0.1*sin(2*pi*(m1+m2))"],
    mu=["0.1*cos(2*pi*m1)"],
)

SMOOTH_3D = dict(
    displacement=["0.02*sin(2*pi*m2)", "0.02*cos(2*pi*m3)", "0.02*sin(2*pi*m1)"],
    phi="0.05*sin(2*pi*m1)*cos(2*pi*m2)",
    r="0.1*cos(2*pi*m3)",
    S="0.1*sin(2*pi*m2)",
    lamt=["0.1*sin(2*pi*(m1+m3))"],
    mu=["0.1*cos(2*pi*m2)"],
)

GRAVITY = {2: [0.3, -0.2], 3: [0.3, -0.2, 0.1]}


def model(n, N, potential=None, fd_order=4, thermo=None):
    grid = geo.LabelGrid.uniform(n, N, fd_order=fd_order)
    return dyn.GasModel(grid, thermo or th.ThermoModel(), potential or dyn.ZeroPotential())


def smooth(n, N, potential=None, fd_order=4):
    """Non-barotropic vortical scenario with one Lin pair."""
    m = model(n, N, potential, fd_order)
    return m, dyn.init_clebsch(m, **(SMOOTH_2D if n == 2 else SMOOTH_3D))


def translation(n, N, U=(0.3, -0.2, 0.1), S0=0.2):
    """Uniform state moving with constant velocity ``U``."""
    m = model(n, N)
    phi = "+".join(f"{U[i]}*m{i + 1}" for i in range(n))
    return m, dyn.init_clebsch(m, phi=phi, S=str(S0))


def dt_for(N, cfl=0.16):
    """Time step proportional to the label spacing on the unit square."""
    return cfl / N


def evolve(m, state, t_end, dt, integrator="rk4"):
    res = dyn.run(m, state, dt, t_end, integrator)
    assert res.error is None, res.error
    return res.state


def ratios(errors):
    return [a / b if b > 0 else math.inf for a, b in zip(errors, errors[1:])]


def required_ratio(N1, N2, p):
    return ORDER_SAFETY * (N2 / N1) ** p


def meets_order(errors, sizes, p, pairs="finest"):
    """Whether refinement from ``sizes[k]`` to ``sizes[k+1]`` reaches order ``p``."""
    idx = range(len(sizes) - 1) if pairs == "all" else [len(sizes) - 2]
    return all(errors[k] / errors[k + 1] >= required_ratio(sizes[k], sizes[k + 1], p) for k in idx)


def max_abs(a):
    return float(np.max(np.abs(a)))
