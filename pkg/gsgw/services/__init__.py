"""Numerical services: losses, plans, solvers, baselines, geometry, amortized matching."""
