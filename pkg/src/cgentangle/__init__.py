"""Coarse-grained entanglement of a free 1D Klein-Gordon field."""

__version__ = "0.1.0"
