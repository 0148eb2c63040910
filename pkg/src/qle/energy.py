"""Quasi-local energy of physical surface data relative to an isometric embedding."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import surface as sk
from .embedding import SpacetimeEmbedding, gauge_quantities, induced_metric, project_surface
from .errors import PreconditionError, ValidationError
from .surface import SurfaceMetric, safe_asinh_ratio

__all__ = [
    "PhysicalSurfaceData",
    "EnergyBreakdown",
    "ISOMETRY_TOL",
    "quasilocal_energy",
    "energy_density",
    "physical_data_from_static",
    "isometry_mismatch",
    "load_physical_data",
    "write_physical_data",
]

ISOMETRY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class PhysicalSurfaceData:
    """The triple ``(sigma, |H|, alpha_H)``; ``alpha_H`` is its ``u`` component."""

    sigma: SurfaceMetric
    normH: np.ndarray
    alpha_H: np.ndarray

    def __post_init__(self):
        n = self.sigma.grid.n
        normH = np.asarray(self.normH, dtype=float)
        alpha = np.asarray(self.alpha_H, dtype=float)
        if normH.shape != (n,) or alpha.shape != (n,):
            raise ValidationError("physical data does not match the metric grid")
        if not (np.all(np.isfinite(normH)) and np.all(np.isfinite(alpha))):
            raise ValidationError("physical data must be finite")
        if np.any(normH <= 0):
            raise ValidationError("mean curvature vector is not spacelike (|H| <= 0)")
        object.__setattr__(self, "normH", normH)
        object.__setattr__(self, "alpha_H", alpha)

    @property
    def grid(self):
        return self.sigma.grid


@dataclass(frozen=True, eq=False)
class EnergyBreakdown:
    reference_term: float
    physical_term: float
    energy: float
    graph_energy: float
    reference_density: np.ndarray  # integrand against dSigma
    physical_density: np.ndarray

    @property
    def path_mismatch(self):
        return abs(self.energy - self.graph_energy)

    def as_dict(self):
        return {
            "energy": self.energy,
            "graph_energy": self.graph_energy,
            "reference_term": self.reference_term,
            "physical_term": self.physical_term,
            "path_mismatch": self.path_mismatch,
        }


def isometry_mismatch(sigma, emb, proj=None):
    """Sup-norm difference between ``sigma`` and the metric induced by ``emb``."""
    induced = induced_metric(emb, proj)
    return float(
        max(np.max(np.abs(induced.suu - sigma.suu)), np.max(np.abs(induced.spp - sigma.spp)))
    )


def _check_pair(data, emb, proj, tol):
    if data.grid is not emb.grid and data.grid.n != emb.grid.n:
        raise ValidationError("physical data and embedding use different grids")
    mismatch = isometry_mismatch(data.sigma, emb, proj)
    if mismatch > tol:
        raise PreconditionError(
            "embedding is not isometric to the physical metric", mismatch=mismatch, tol=tol
        )


def _physical_integrand(data, gd):
    """``sqrt(A^2 |H|^2 + B^2) - B asinh(B / (A |H|)) - V^2 alpha_H(grad tau)``."""
    A, B = gd.A, gd.B
    root = np.sqrt((A * data.normH) ** 2 + B**2)
    return root - B * safe_asinh_ratio(B, A * data.normH) - gd.V**2 * data.alpha_H * gd.grad_tau_u


def quasilocal_energy(data, emb, *, tol=ISOMETRY_TOL):
    proj = project_surface(emb)
    _check_pair(data, emb, proj, tol)
    gd = gauge_quantities(emb, proj)
    sigma = data.sigma
    # V dSigmahat = A dSigma, so the reference term is an integral over sigma
    ref_density = gd.A * proj.mean_curvature
    phys_density = _physical_integrand(data, gd)
    reference_term = sk.integrate(proj.metric, gd.V * proj.mean_curvature)
    physical_term = sk.integrate(sigma, phys_density)

    ref_graph = (
        np.sqrt((gd.A * gd.normH0) ** 2 + gd.B**2)
        + gd.B * gd.theta
        - gd.V**2 * gd.alpha_H0 * gd.grad_tau_u
    )
    graph = sk.integrate(sigma, ref_graph - phys_density) / (8.0 * np.pi)
    return EnergyBreakdown(
        reference_term=reference_term,
        physical_term=physical_term,
        energy=(reference_term - physical_term) / (8.0 * np.pi),
        graph_energy=graph,
        reference_density=ref_density,
        physical_density=phys_density,
    )


def energy_density(data, emb, *, tol=ISOMETRY_TOL):
    proj = project_surface(emb)
    _check_pair(data, emb, proj, tol)
    gd = gauge_quantities(emb, proj)
    shift = (gd.B / gd.A) ** 2
    return (np.sqrt(gd.normH0**2 + shift) - np.sqrt(data.normH**2 + shift)) / gd.A


def physical_data_from_static(world, emb):
    """Data ``(sigma, |H|, alpha_H)`` of ``emb`` regarded as a surface in ``world``."""
    if emb.reference is not world:
        emb = SpacetimeEmbedding(world, emb.grid, emb.R, emb.q, emb.tau)
    gd = gauge_quantities(emb)
    return PhysicalSurfaceData(gd.sigma, gd.normH0, gd.alpha_H0)


CSV_COLUMNS = ("u", "sigma_uu", "sigma_phiphi", "normH", "alpha_u")


def write_physical_data(path, data):
    g = data.grid
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in zip(g.u, data.sigma.suu, data.sigma.spp, data.normH, data.alpha_H):
            writer.writerow([repr(float(v)) for v in row])


def load_physical_data(path):
    """Read per-node data; rows must sit on the Gauss-Legendre nodes of their count."""
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ValidationError("unreadable physical data file", path=str(path)) from exc
    if table.shape[1] != len(CSV_COLUMNS):
        raise ValidationError("physical data file needs 5 columns", columns=list(CSV_COLUMNS))
    table = table[np.argsort(-table[:, 0])]  # grid.u is decreasing
    grid = sk.make_grid(table.shape[0])
    if not np.allclose(table[:, 0], grid.u, rtol=0, atol=1e-10):
        raise ValidationError("u column is not a Gauss-Legendre node set")
    sigma = SurfaceMetric(grid, table[:, 1], table[:, 2])
    return PhysicalSurfaceData(sigma, table[:, 3], table[:, 4])
