"""Assemble references, surfaces and physical data from a :class:`RunConfig`."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from . import surface as sk
from .embedding import SpacetimeEmbedding, isometric_embed_axisym
from .energy import load_physical_data, physical_data_from_static

__all__ = ["Scenario", "build_scenario", "realize_surface", "target_metric"]


def target_metric(grid, spec):
    """Metric ``radius^2 (1 + sum_l c_l P_l)`` times the unit round metric."""
    factor = 1.0 + sk.legendre_field(grid, np.asarray(spec.conformal or [0.0]))
    return sk.SurfaceMetric.conformal(grid, spec.radius**2 * factor)


def realize_surface(spec, static, grid, tau, *, tol=1e-9):
    """The surface described by ``spec`` inside ``static`` with time function ``tau``."""
    if spec.type == "round":
        return SpacetimeEmbedding.coordinate_sphere(static, grid, spec.radius, tau)
    if spec.type == "profile":
        R = sk.legendre_field(grid, np.asarray(spec.R))
        q = sk.legendre_field(grid, np.asarray(spec.q or [0.0]))
        return SpacetimeEmbedding(static, grid, R, q, tau)
    return isometric_embed_axisym(target_metric(grid, spec), static, tau, tol=tol)


@dataclass(frozen=True, eq=False)
class Scenario:
    config: object
    reference: object
    world: object
    grid: sk.AxiGrid

    @property
    def spec(self):
        return self.config.surface

    @property
    def tol(self):
        return self.config.tolerances

    def field(self, coeffs):
        coeffs = np.asarray(coeffs if len(coeffs) else [0.0], dtype=float)
        return sk.legendre_field(self.grid, coeffs)

    @cached_property
    def tau(self):
        return self.field(self.spec.tau)

    @cached_property
    def physical(self):
        """The physical surface in the world, or ``None`` for file data."""
        if self.spec.data_file is not None:
            return None
        return realize_surface(
            self.spec, self.world, self.grid, self.field(self.spec.world_tau), tol=self.tol.embedding
        )

    @cached_property
    def data(self):
        if self.spec.data_file is not None:
            path = Path(self.spec.data_file)
            return load_physical_data(path if path.is_absolute() else self.config.base_dir / path)
        return physical_data_from_static(self.world, self.physical)

    def embed(self, tau=None, guess=None):
        """Isometric embedding of the physical metric into the reference."""
        tau = self.tau if tau is None else tau
        if guess is None and self.physical is not None and self.world is self.reference:
            guess = self.physical
        return isometric_embed_axisym(
            self.data.sigma, self.reference, tau, guess=guess, tol=self.tol.embedding
        )

    @cached_property
    def slice_surface(self):
        """The configured surface placed in the reference slice (``tau = 0``)."""
        zero = np.zeros(self.grid.n)
        if self.spec.data_file is not None:
            return isometric_embed_axisym(
                self.data.sigma, self.reference, zero, tol=self.tol.embedding
            )
        return realize_surface(self.spec, self.reference, self.grid, zero, tol=self.tol.embedding)


def build_scenario(cfg):
    reference = cfg.reference.build(cfg.base_dir)
    world = reference if cfg.world is None else cfg.world.build(cfg.base_dir)
    if cfg.surface.data_file is not None:
        path = Path(cfg.surface.data_file)
        data = load_physical_data(path if path.is_absolute() else cfg.base_dir / path)
        grid = data.grid
    else:
        grid = sk.make_grid(cfg.resolution.n)
    return Scenario(cfg, reference, world, grid)
