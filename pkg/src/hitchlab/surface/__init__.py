"""Genus-2 octagon surface: group, triangulation, theta series."""
from .group import FuchsianGroup, build_genus2_octagon
from .mesh import SurfaceMesh, cotan_weights, integrate, stiffness_matrix, triangulate
from .theta import BeltramiSample, QuadDifferentialSample, beltrami_from_quaddiff, poincare_theta_series

__all__ = [
    "FuchsianGroup",
    "build_genus2_octagon",
    "SurfaceMesh",
    "triangulate",
    "cotan_weights",
    "stiffness_matrix",
    "integrate",
    "QuadDifferentialSample",
    "BeltramiSample",
    "poincare_theta_series",
    "beltrami_from_quaddiff",
]
