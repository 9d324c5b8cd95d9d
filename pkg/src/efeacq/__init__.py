"""Curiosity-weighted (expected free energy) acquisition for hybrid learning and optimization."""

__version__ = "0.1.0"
