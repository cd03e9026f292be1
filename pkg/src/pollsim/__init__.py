"""Deterministic simulator of a rate-limited sampled-voting audit protocol."""

__version__ = "0.1.0"
