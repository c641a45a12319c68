"""Dimension-robust Metropolis-Hastings for a 1D elliptic inverse problem with a
uniform-series prior, plus a finite-state spectral-gap laboratory."""

__version__ = "0.1.0"
