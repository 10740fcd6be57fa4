"""Steady states and Evans-function spectral stability for the 1D viscous
shock tube problem."""

__version__ = "0.1.0"
