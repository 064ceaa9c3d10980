"""Foveation-aware quality assessment for omnidirectional images."""

__version__ = "0.1.0"

from .cli import main

__all__ = ["main", "__version__"]
