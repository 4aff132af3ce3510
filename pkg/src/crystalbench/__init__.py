"""Benchmarking engine for generated inorganic crystal structures."""

__version__ = "0.1.0"
