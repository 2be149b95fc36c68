"""Predict whether nodes of a temporal graph stay in, move between or drop
out of their communities."""

__version__ = "0.1.0"
