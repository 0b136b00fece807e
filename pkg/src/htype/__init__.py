"""Numerical toolkit for H-type groups: algebra, geodesics, heat kernels, Monte Carlo."""

__version__ = "0.1.0"
