"""Hearth: an end-user automation environment for a simulated smart home."""

__version__ = "0.1.0"
