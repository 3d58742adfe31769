"""Propagation-of-smallness certificates and stagewise null controls for 1D heat equations."""

__version__ = "0.1.0"
