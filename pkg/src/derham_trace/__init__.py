"""Lowest-order de Rham finite elements with trace-preserving commuting projections."""
from .mesh import Mesh, build_mesh, gen_structured_cube, parse_mesh, classify, shape_regularity

__all__ = ["Mesh", "build_mesh", "gen_structured_cube", "parse_mesh", "classify",
           "shape_regularity"]
