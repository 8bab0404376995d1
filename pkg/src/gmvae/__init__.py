"""Gaussian-manifold geometry, the PGM normal distribution and GM-VAE."""

__version__ = "0.1.0"
