"""Entanglement spectra and nonstabilizerness of spin-1/2 chain ground states."""

__version__ = "0.1.0"
