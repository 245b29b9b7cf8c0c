"""Normalization constants, densities and averages for Bures-type
eigenvalue distributions of density matrices."""

__version__ = "0.1.0"
