"""Dual-level stochastic multi-person 3D motion forecasting toolkit."""

__version__ = "0.1.0"
FORMAT_VERSION = 1
