"""Bernstein classes of best-approximation error sequences, with exact witnesses."""

__version__ = "0.1.0"
