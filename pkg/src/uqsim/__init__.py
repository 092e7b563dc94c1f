"""Numerical model of a coherence-preserving photonic quantum switch."""

__version__ = "0.1.0"
