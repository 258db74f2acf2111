"""Deterministic grid-world simulator and agent framework for interactive
personalized object navigation."""

__version__ = "0.1.0"
