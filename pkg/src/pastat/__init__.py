"""Exact stationarity tests for piecewise affine functions."""

__version__ = "0.1.0"
