"""Hallucination benchmark forging and scoring over hypothetical terms."""

__version__ = "0.1.0"
