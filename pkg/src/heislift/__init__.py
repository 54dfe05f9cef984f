"""Lipschitz extension of point-cloud data into the Heisenberg group.

The pipeline: Whitney cubes of the complement of a finite set, a conforming
triangulation of them, a skeleton map filled through a target oracle, radial
projections onto that skeleton, and Monte-Carlo diagnostics of the result.
"""

from .errors import (
    ConstructionError,
    HeisliftError,
    NoValidDirection,
    NotCovered,
    SingularProximity,
    UnsupportedFill,
)
from .extend import BoundaryData, ExtensionField, build_field
from .heis import GAMMA_H, HorizontalPath, HPoint, connect_points, koranyi_dist
from .targets import Euclidean, Heisenberg, fill_sphere
from .triangulate import SimplicialComplex, build_complex, quality_report, validate_complex
from .whitney import CompactSet, Decomposition, decompose, verify_whitney

__all__ = [
    "BoundaryData",
    "CompactSet",
    "ConstructionError",
    "Decomposition",
    "Euclidean",
    "ExtensionField",
    "GAMMA_H",
    "HPoint",
    "Heisenberg",
    "HeisliftError",
    "HorizontalPath",
    "NoValidDirection",
    "NotCovered",
    "SimplicialComplex",
    "SingularProximity",
    "UnsupportedFill",
    "build_complex",
    "build_field",
    "connect_points",
    "decompose",
    "fill_sphere",
    "koranyi_dist",
    "quality_report",
    "validate_complex",
    "verify_whitney",
]
