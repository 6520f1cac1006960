"""Terrain perception and foothold-safety toolkit."""

__version__ = "0.1.0"

from .backend import backend_name

__all__ = ["backend_name", "__version__"]
