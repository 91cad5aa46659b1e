"""Numerical laboratory for quantitative unique continuation machinery."""

__version__ = "0.1.0"
