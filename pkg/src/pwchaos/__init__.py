"""Melnikov machinery, loop maps and constructive symbol shadowing for
planar piecewise-smooth systems."""

from .backends import USING_NUMBA, backend_name

__version__ = "0.1.0"

__all__ = ["USING_NUMBA", "backend_name", "__version__"]
