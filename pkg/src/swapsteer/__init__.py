"""Swap-steering witness, self-testing extraction and seed-free randomness certification."""

__version__ = "0.1.0"
