"""Numerical laboratory for the Schroedinger map flow from flat tori into S^2."""

__version__ = "0.1.0"
