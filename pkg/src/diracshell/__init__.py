"""Boundary-integral spectral solver for 3D Dirac operators with
electrostatic and Lorentz scalar delta-shell interactions."""

__version__ = "0.1.0"
