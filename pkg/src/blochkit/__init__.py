"""Bloch eigenvalues of periodic Schroedinger operators by perturbation series, checked against a plane-wave oracle."""

__version__ = "0.1.0"
