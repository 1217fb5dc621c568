"""Screening small regulatory networks for robust hysteresis."""

__version__ = "0.1.0"
