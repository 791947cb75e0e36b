"""Wavelet-expanded Levy and fractional noise, stochastic Navier-Stokes on the 2D torus,
and Monte Carlo checks on the densities of its finite-dimensional projections."""

__version__ = "0.1.0"
