"""Numerical workbench for the space-homogeneous Landau equation with Coulomb interaction."""

__version__ = "0.1.0"
