"""Counting boundary single-peak solutions via the reduced vector field."""

__version__ = "0.1.0"
