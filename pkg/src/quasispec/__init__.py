"""Spectral and dynamical analysis of one-dimensional quasicrystal models."""

__version__ = "0.1.0"
