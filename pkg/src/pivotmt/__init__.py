"""Pivot-based corpus extension and a toy multi-source NMT model."""

__version__ = "0.1.0"
