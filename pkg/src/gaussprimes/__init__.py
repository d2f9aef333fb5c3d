"""Finite-scale toolkit for Gaussian prime constellations and their pseudorandom majorants."""

from .gint import GaussianInt, canonical, conj, divides, gcd, norm, parse_gint

__version__ = "0.1.0"

__all__ = ["GaussianInt", "canonical", "conj", "divides", "gcd", "norm", "parse_gint", "__version__"]
