"""Quasi-local energy of 2-surfaces relative to static reference spacetimes."""

from .embedding import SpacetimeEmbedding, isometric_embed_axisym
from .energy import PhysicalSurfaceData, physical_data_from_static, quasilocal_energy
from .errors import (
    ConvergenceError,
    DomainError,
    GeometryError,
    PreconditionError,
    QLEError,
    ValidationError,
)
from .reference import StaticReference, build_reference
from .surface import SurfaceMetric, make_grid

__version__ = "0.1.0"

__all__ = [
    "SpacetimeEmbedding",
    "isometric_embed_axisym",
    "PhysicalSurfaceData",
    "physical_data_from_static",
    "quasilocal_energy",
    "QLEError",
    "ValidationError",
    "DomainError",
    "PreconditionError",
    "GeometryError",
    "ConvergenceError",
    "StaticReference",
    "build_reference",
    "SurfaceMetric",
    "make_grid",
]
