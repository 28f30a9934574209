"""Calibration functions of the quadratic surrogate for structured prediction losses."""

__version__ = "0.1.0"
