"""Noise-prior trainer for the multiband reconstruction toolkit."""

__version__ = "0.1.0"
