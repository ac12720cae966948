"""Numerical checks for conformal geodesics and their holographic harmonic-map description."""

__version__ = "0.1.0"
