"""Invent, tune, and schedule clause-selection strategies for a small prover."""

__version__ = "0.1.0"
