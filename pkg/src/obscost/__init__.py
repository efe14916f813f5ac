"""Effective observability constants for the linearized KdV boundary-control problem."""

from .xreal import XReal, xr

__version__ = "0.1.0"
__all__ = ["XReal", "xr", "__version__"]
