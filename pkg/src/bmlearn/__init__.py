"""Bounded-memory PAC learning on finite hypothesis classes."""
__version__ = "0.1.0"
