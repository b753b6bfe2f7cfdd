"""Numerical lab for universal-formula families."""

__version__ = "0.1.0"
