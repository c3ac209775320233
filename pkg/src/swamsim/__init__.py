"""Trace-driven simulator of mobile memory reclamation policies."""

__version__ = "0.1.0"
