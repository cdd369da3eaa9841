"""Gibbs-Poisson occupancy models for species sampling."""

__version__ = "1.0.0"
