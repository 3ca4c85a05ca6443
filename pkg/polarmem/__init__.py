"""Polar and convolutional polar codes over finite-state channels."""

__version__ = "0.1.0"
