"""Squeezed-light NMOR magnetometer noise simulation."""

__version__ = "0.1.0"
