"""Inertial proximal methods and second-order dynamics for comonotone inclusions."""

__version__ = "0.1.0"
