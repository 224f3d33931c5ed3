"""Declarative stencil kernels on decomposed 3D grids, with an incompressible flow solver."""

__version__ = "0.1.0"
