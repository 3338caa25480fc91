"""Generalized sliced Gromov-Wasserstein matching toolkit."""

__version__ = "0.1.0"
