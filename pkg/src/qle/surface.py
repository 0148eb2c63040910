"""Axisymmetric surface calculus on Gauss-Legendre collocation grids.

Surfaces are parametrized by ``(u, phi)`` with ``u`` in ``(0, pi)``; every
axisymmetric quantity is sampled at the Gauss-Legendre nodes ``x_k = cos u_k``.
Functions that are smooth on the sphere are smooth in ``x`` and are
differentiated through their Legendre series.  Quantities that flip sign
through the poles (the ``u`` components of vectors and one-forms) carry an
explicit ``sin u`` factor which is divided out before differentiating.

Scalar fields and the ``u`` component of one-forms are plain ``ndarray``
objects of length ``grid.n``; the grid travels with the metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre as npleg

from .errors import DegenerateGaugeError, ValidationError

__all__ = [
    "AxiGrid",
    "SurfaceMetric",
    "make_grid",
    "legendre_field",
    "legendre_coefficients",
    "grad",
    "div",
    "laplace",
    "integrate",
    "inner",
    "safe_asinh_ratio",
]

# Type aliases, for documentation only.
SurfaceField = np.ndarray
SurfaceOneForm = np.ndarray  # u component alpha_u at the nodes

POLE_REGULARITY_RTOL = 1e-6


@dataclass(frozen=True, eq=False)
class AxiGrid:
    """Gauss-Legendre nodes in ``x = cos u`` with spectral differentiation."""

    n: int
    x: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    vander: np.ndarray = field(repr=False)
    analysis: np.ndarray = field(repr=False)
    dx_matrix: np.ndarray = field(repr=False)

    @cached_property
    def u(self):
        return np.arccos(self.x)

    @cached_property
    def sin_u(self):
        return np.sqrt(1.0 - self.x**2)

    @cached_property
    def one_minus_x2(self):
        return 1.0 - self.x**2

    def dx(self, values):
        return self.dx_matrix @ values

    def du_even(self, values):
        """``d/du`` of a field that is smooth in ``x``."""
        return -self.sin_u * self.dx(values)

    def du_odd(self, values):
        """``d/du`` of a field of the form ``sin u * w(x)`` with ``w`` smooth."""
        w = values / self.sin_u
        return self.x * w - self.one_minus_x2 * self.dx(w)

    def coefficients(self, values):
        return self.analysis @ values

    def evaluate(self, values, x):
        """Evaluate the degree ``n - 1`` interpolant of ``values`` at ``x``."""
        return npleg.legval(x, self.coefficients(values))


_GRID_CACHE: dict[int, AxiGrid] = {}


def _collocation_derivative(x, w):
    # barycentric weights of Gauss-Legendre nodes; diagonal by the negative-sum trick
    lam = (-1.0) ** np.arange(x.size) * np.sqrt((1.0 - x**2) * w)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    dm = (lam[None, :] / lam[:, None]) / diff
    np.fill_diagonal(dm, 0.0)
    np.fill_diagonal(dm, -dm.sum(axis=1))
    return dm


def make_grid(n):
    if n < 4:
        raise ValidationError("grid needs at least 4 nodes", n=n)
    n = int(n)
    if n in _GRID_CACHE:
        return _GRID_CACHE[n]
    x, w = npleg.leggauss(n)
    vander = npleg.legvander(x, n - 1)
    analysis = ((2 * np.arange(n) + 1) / 2.0)[:, None] * vander.T * w[None, :]
    grid = AxiGrid(n, x, w, vander, analysis, _collocation_derivative(x, w))
    for arr in (grid.x, grid.weights, grid.vander, grid.analysis, grid.dx_matrix):
        arr.setflags(write=False)
    _GRID_CACHE[n] = grid
    return grid


def legendre_field(grid, coeffs):
    """Sample ``sum_l coeffs[l] P_l(cos u)`` on the grid."""
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if coeffs.size == 0:
        return np.zeros(grid.n)
    return npleg.legval(grid.x, coeffs)


def legendre_coefficients(grid, values):
    return grid.coefficients(values)


@dataclass(frozen=True, eq=False)
class SurfaceMetric:
    """Diagonal axisymmetric metric ``suu du^2 + spp dphi^2``.

    Regularity at the poles requires ``spp / sin^2 u -> suu`` there; it is
    checked on construction by extrapolating both Legendre series to
    ``x = +-1``.
    """

    grid: AxiGrid
    suu: np.ndarray
    spp: np.ndarray
    check: bool = True

    def __post_init__(self):
        suu = np.asarray(self.suu, dtype=float)
        spp = np.asarray(self.spp, dtype=float)
        object.__setattr__(self, "suu", suu)
        object.__setattr__(self, "spp", spp)
        if suu.shape != (self.grid.n,) or spp.shape != (self.grid.n,):
            raise ValidationError("metric components do not match the grid")
        if not (np.all(np.isfinite(suu)) and np.all(np.isfinite(spp))):
            raise ValidationError("metric components must be finite")
        if np.any(suu <= 0) or np.any(spp <= 0):
            raise ValidationError("metric must be positive definite at every node")
        if self.check:
            ends = np.array([-1.0, 1.0])
            a_end = self.grid.evaluate(self.a, ends)
            b_end = self.grid.evaluate(self.b, ends)
            mismatch = np.max(np.abs(a_end - b_end) / np.abs(a_end))
            if mismatch > POLE_REGULARITY_RTOL:
                raise ValidationError(
                    "metric is not regular at the poles", mismatch=float(mismatch)
                )

    @property
    def a(self):
        return self.suu

    @cached_property
    def b(self):
        """``spp / sin^2 u``, smooth and positive for regular metrics."""
        return self.spp / self.grid.one_minus_x2

    @cached_property
    def s(self):
        """Area density in ``(x, phi)``: ``dSigma = s dx dphi``."""
        return np.sqrt(self.a * self.b)

    @cached_property
    def area_element(self):
        """``sqrt(suu spp)``, the density with respect to ``du dphi``."""
        return np.sqrt(self.suu * self.spp)

    @property
    def area(self):
        return integrate(self, np.ones(self.grid.n))

    @classmethod
    def round(cls, grid, radius):
        r2 = float(radius) ** 2
        return cls(grid, np.full(grid.n, r2), r2 * grid.one_minus_x2)

    @classmethod
    def conformal(cls, grid, factor):
        """``factor * (du^2 + sin^2 u dphi^2)`` for a positive node field."""
        factor = np.asarray(factor, dtype=float)
        return cls(grid, factor.copy(), factor * grid.one_minus_x2)


def _same_grid(metric, *arrays):
    for arr in arrays:
        if np.shape(arr) != (metric.grid.n,):
            raise ValidationError("field and metric live on different grids")


def grad(metric, f):
    """``u`` component of the gradient vector of ``f``."""
    _same_grid(metric, f)
    return metric.grid.du_even(f) / metric.suu


def div(metric, wu):
    """Divergence of the axisymmetric vector field with ``u`` component ``wu``."""
    _same_grid(metric, wu)
    g = metric.grid
    return -g.dx(g.sin_u * metric.s * wu) / metric.s


def laplace(metric, f):
    return div(metric, grad(metric, f))


def integrate(metric, values):
    """``int values dSigma`` over the closed surface."""
    _same_grid(metric, values)
    return 2.0 * np.pi * float(np.sum(metric.grid.weights * metric.s * values))


def inner(metric, alpha_u, wu):
    """Pair a one-form with a vector (both given by their ``u`` components)."""
    return alpha_u * wu


def sharp(metric, alpha_u):
    """Raise the index of a one-form."""
    return alpha_u / metric.suu


def safe_asinh_ratio(numerator, denominator, large=1e4):
    """``asinh(numerator / denominator)``; logarithmic form for ``|ratio| > large``."""
    num = np.asarray(numerator, dtype=float)
    den = np.broadcast_to(np.asarray(denominator, dtype=float), num.shape)
    if np.any(den <= 0):
        raise DegenerateGaugeError(
            "degenerate gauge: |H0| or V vanishes",
            nodes=np.flatnonzero(den <= 0).tolist(),
        )
    ratio = num / den
    mag = np.abs(ratio)
    big = mag > large
    safe_mag = np.where(big, mag, 1.0)
    tail = np.log(2.0 * safe_mag) + 1.0 / (4.0 * safe_mag**2)
    out = np.where(big, np.sign(ratio) * tail, np.arcsinh(np.where(big, 0.0, ratio)))
    return out if out.ndim else float(out)
