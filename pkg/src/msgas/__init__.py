"""Lagrangian multi-symplectic gas dynamics: simulator and structure checks."""

__version__ = "0.1.0"
