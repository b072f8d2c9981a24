"""Trace-driven simulator of near-memory address translation."""

__version__ = "0.1.0"
