"""Fractional perimeters of planar clusters, their Dirichlet minimizers, and stationary cones."""

__version__ = "0.1.0"
