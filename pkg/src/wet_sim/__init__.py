"""Simulator and solvers for MIMO wireless energy transfer with one-bit feedback."""

__version__ = "0.1.0"
