"""Invariant-domain-preserving graph viscosity with greedy wave speeds."""

__version__ = "0.1.0"
