"""Numerical laboratory for a weighted diffusion on the Sierpinski carpet."""

__version__ = "0.1.0"
