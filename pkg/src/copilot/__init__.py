"""Exploration-deployment engine for data analysis agents."""

__version__ = "0.1.0"
