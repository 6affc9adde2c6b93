"""Thermal-guided adaptive spatio-temporal sampling of egocentric RGB streams."""

__version__ = "0.1.0"
