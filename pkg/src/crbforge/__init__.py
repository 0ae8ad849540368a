"""Mechanized Cramér-Rao bound derivations for array sensing scenarios."""

__version__ = "0.1.0"
