"""Numerical construction of multi-bump segregated states for a planar
coupled nonlinear Schrodinger system with sublinear coupling."""

__version__ = "0.1.0"
