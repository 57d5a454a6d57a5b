"""Simulation of the toric code nonlocal game."""

__version__ = "0.1.0"
