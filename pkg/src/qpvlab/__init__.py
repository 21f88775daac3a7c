"""Numerical laboratory for entanglement-limited attacks on
rotation-based quantum position verification protocols."""

__version__ = "0.1.0"
