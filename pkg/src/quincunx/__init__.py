"""Coined quantum walk over coherent states on a circle in a lossy cavity."""

__version__ = "0.1.0"
