"""Numerical laboratory for wave-corpuscle solutions of the nonlinear Schroedinger equation."""

__version__ = "0.1.0"
