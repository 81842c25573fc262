"""Numerical toolkit for the stationary-spacetime / Fermat-metric correspondence."""

from .kernel import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
