"""Symbolic exterior calculus for the gas-dynamics forms."""

from .exterior import (
    CoordSystem,
    DifferentialForm,
    contraction,
    d_scalar,
    exterior_derivative,
    section_pullback,
    substitute,
    wedge,
)
from .fluid import (
    ClosureReport,
    FluidForms,
    ideal_closure_check,
    pullback_beta,
    symplectic_conservation_form,
    theta_pullback,
)
from .scalar import Expr, ThermoPrims

__all__ = [
    "ClosureReport",
    "CoordSystem",
    "DifferentialForm",
    "Expr",
    "FluidForms",
    "ThermoPrims",
    "contraction",
    "d_scalar",
    "exterior_derivative",
    "ideal_closure_check",
    "pullback_beta",
    "section_pullback",
    "substitute",
    "symplectic_conservation_form",
    "theta_pullback",
    "wedge",
]
