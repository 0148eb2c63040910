"""Spherically symmetric static reference spacetimes.

The reference metric is ``-V(R)^2 dt^2 + dR^2/f(R)^2 + R^2 (du^2 + sin^2 u dphi^2)``.
For the closed-form models the lapse and the radial factor coincide,
``V = f = sqrt(F)`` with ``F = 1 - 2m/R - Lambda R^2/3``, and every curvature
quantity is written through ``F`` and its derivatives so that no cancellation
occurs near a horizon.  Tabulated models carry cubic splines for ``V`` and
(optionally) ``f``.

Orthonormal components are reported in the frame ``(f d/dR, R^-1 d/du,
(R sin u)^-1 d/dphi)``; by symmetry every symmetric 2-tensor built from the
static data is diagonal there with equal tangential entries, so a pair
``(radial, tangential)`` describes it completely.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import DomainError, ValidationError

__all__ = [
    "Kind",
    "StaticReference",
    "CurvatureBundle",
    "build_reference",
    "load_radial_table",
    "curvature_at",
    "check_vacuum_static",
    "null_convergence_min_eig",
    "default_sample_points",
]

V_EPS = 1e-12


class Kind(str, enum.Enum):
    MINKOWSKI = "minkowski"
    SCHWARZSCHILD = "schwarzschild"
    SCHWARZSCHILD_LAMBDA = "schwarzschild_lambda"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class StaticReference:
    """Immutable static triple; all methods are vectorized over ``R``."""

    kind: Kind
    mass: float = 0.0
    cosmological_constant: float = 0.0
    r_min: float = 0.0
    r_max: float = np.inf
    horizon: float | None = None
    outer_horizon: float | None = None
    spline_V: CubicSpline | None = field(default=None, repr=False)
    spline_f: CubicSpline | None = field(default=None, repr=False)

    # -- radial profile -------------------------------------------------

    @property
    def closed_form(self):
        return self.kind is not Kind.CUSTOM

    def _check_table_range(self, R):
        R = np.asarray(R, dtype=float)
        lo, hi = self.spline_V.x[0], self.spline_V.x[-1]
        if np.any(R < lo - 1e-12) or np.any(R > hi + 1e-12):
            raise DomainError("radius outside the tabulated range", lo=lo, hi=hi)
        return R

    def F(self, R):
        """Square of the radial factor, ``f^2``."""
        R = np.asarray(R, dtype=float)
        if self.kind is Kind.MINKOWSKI:
            return np.ones_like(R)
        if self.closed_form:
            lam = self.cosmological_constant
            return 1.0 - 2.0 * self.mass / R - lam * R**2 / 3.0
        return self.f(R) ** 2

    def dF(self, R):
        R = np.asarray(R, dtype=float)
        if self.kind is Kind.MINKOWSKI:
            return np.zeros_like(R)
        if self.closed_form:
            lam = self.cosmological_constant
            return 2.0 * self.mass / R**2 - 2.0 * lam * R / 3.0
        return 2.0 * self.f(R) * self.df(R)

    def d2F(self, R):
        R = np.asarray(R, dtype=float)
        if self.kind is Kind.MINKOWSKI:
            return np.zeros_like(R)
        if self.closed_form:
            lam = self.cosmological_constant
            return -4.0 * self.mass / R**3 - 2.0 * lam / 3.0
        f, df = self.f(R), self.df(R)
        return 2.0 * (df**2 + f * self.spline_f(R, 2))

    def V(self, R):
        if self.closed_form:
            F = self.F(R)
            # a horizon radius is a rounded root of F; treat its round-off as zero
            return np.sqrt(np.where((F < 0) & (F > -1e-13), 0.0, F))
        return self.spline_V(self._check_table_range(R))

    def dV(self, R):
        if self.closed_form:
            return self.dF(R) / (2.0 * self.V(R))
        return self.spline_V(self._check_table_range(R), 1)

    def d2V(self, R):
        if self.closed_form:
            V = self.V(R)
            return self.d2F(R) / (2.0 * V) - self.dF(R) ** 2 / (4.0 * V**3)
        return self.spline_V(self._check_table_range(R), 2)

    def f(self, R):
        if self.closed_form:
            return self.V(R)
        if self.spline_f is None:
            return self.V(R)
        return self.spline_f(self._check_table_range(R))

    def df(self, R):
        if self.closed_form:
            return self.dV(R)
        if self.spline_f is None:
            return self.dV(R)
        return self.spline_f(self._check_table_range(R), 1)

    def F_over_gap(self, R):
        """``F(R) / (R - R_h)`` for the inner horizon ``R_h``; smooth through it."""
        if self.horizon is None:
            raise DomainError("reference has no inner horizon")
        R = np.asarray(R, dtype=float)
        rh = self.horizon
        if self.kind is Kind.SCHWARZSCHILD:
            return 1.0 / R
        if self.kind is Kind.SCHWARZSCHILD_LAMBDA:
            a = -self.cosmological_constant / 3.0
            return (a * R**2 + a * rh * R + 1.0 + a * rh**2) / R
        gap = R - rh
        return np.where(np.abs(gap) > 0, self.F(R) / np.where(gap == 0, 1, gap), self.dF(rh))

    def normal_derivative_V(self, R):
        """``nu(V) = f V'`` for the outward unit normal of a coordinate sphere."""
        if self.closed_form:
            return self.dF(R) / 2.0
        return self.f(R) * self.dV(R)

    # -- curvature -----------------------------------------------------

    def ricci_orthonormal(self, R):
        R = np.asarray(R, dtype=float)
        if self.kind is Kind.MINKOWSKI:
            z = np.zeros_like(R)
            return z, z.copy()
        F, dF = self.F(R), self.dF(R)
        if self.closed_form:
            # (1 - F)/R^2 written without cancellation
            lam = self.cosmological_constant
            one_minus_F_over_R2 = 2.0 * self.mass / R**3 + lam / 3.0
        else:
            one_minus_F_over_R2 = (1.0 - F) / R**2
        return -dF / R, -dF / (2.0 * R) + one_minus_F_over_R2

    def hessian_V_orthonormal(self, R):
        R = np.asarray(R, dtype=float)
        if self.kind is Kind.MINKOWSKI:
            z = np.zeros_like(R)
            return z, z.copy()
        if self.closed_form:
            V = self.V(R)
            return V * self.d2F(R) / 2.0, V * self.dF(R) / (2.0 * R)
        f, df = self.f(R), self.df(R)
        dV = self.dV(R)
        return f**2 * self.d2V(R) + f * df * dV, f**2 * dV / R

    def laplacian_V(self, R):
        h_rr, h_tt = self.hessian_V_orthonormal(R)
        return h_rr + 2.0 * h_tt

    def null_energy_orthonormal(self, R):
        """``Q = Lap(V) g - Hess(V) + V Ric`` as (radial, tangential) entries."""
        lap = self.laplacian_V(R)
        h_rr, h_tt = self.hessian_V_orthonormal(R)
        ric_rr, ric_tt = self.ricci_orthonormal(R)
        V = self.V(R)
        return lap - h_rr + V * ric_rr, lap - h_tt + V * ric_tt

    def scalar_curvature(self, R):
        ric_rr, ric_tt = self.ricci_orthonormal(R)
        return ric_rr + 2.0 * ric_tt

    # -- domain --------------------------------------------------------

    def inside(self, R, eps=V_EPS):
        R = np.asarray(R, dtype=float)
        ok = (R > self.r_min) & (R < self.r_max)
        if not np.all(ok):
            return False
        return bool(np.all(self.V(R) > eps))

    def require_inside(self, R, what="radius"):
        R = np.asarray(R, dtype=float)
        if not np.all(np.isfinite(R)):
            raise DomainError(f"{what} is not finite")
        if np.any(R <= self.r_min) or np.any(R >= self.r_max):
            raise DomainError(
                f"{what} outside the static domain",
                r_min=self.r_min,
                r_max=self.r_max,
                bad=float(R.flat[np.argmax((R <= self.r_min) | (R >= self.r_max))]),
            )
        if np.any(self.V(R) <= V_EPS):
            raise DomainError(f"{what} at or beyond a horizon (V <= {V_EPS:g})")
        return R

    def describe(self):
        out = {"kind": self.kind.value}
        if self.kind in (Kind.SCHWARZSCHILD, Kind.SCHWARZSCHILD_LAMBDA):
            out["mass"] = self.mass
        if self.kind is Kind.SCHWARZSCHILD_LAMBDA:
            out["cosmological_constant"] = self.cosmological_constant
        out["r_min"] = self.r_min
        out["r_max"] = None if np.isinf(self.r_max) else self.r_max
        out["horizon"] = self.horizon
        return out


def _sds_roots(m, lam):
    """Positive roots of ``R F(R) = R - 2m - lam R^3 / 3``."""
    roots = np.roots([-lam / 3.0, 0.0, 1.0, -2.0 * m])
    real = sorted(r.real for r in roots if abs(r.imag) < 1e-9 * max(1.0, abs(r)) and r.real > 0)
    p = lambda r: r - 2.0 * m - lam * r**3 / 3.0  # noqa: E731
    refined = []
    for r in real:
        lo, hi = r * (1 - 1e-6), r * (1 + 1e-6)
        if p(lo) * p(hi) < 0:
            r = brentq(p, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        refined.append(r)
    return refined


def build_reference(kind, mass=0.0, cosmological_constant=0.0, table=None):
    """Construct a reference from its kind and parameters.

    ``table`` (Custom only) is a mapping with arrays ``R``, ``V`` and optional
    ``f``; see :func:`load_radial_table`.
    """
    try:
        kind = Kind(kind)
    except ValueError:
        raise ValidationError(f"unknown reference kind {kind!r}") from None
    mass = float(mass)
    lam = float(cosmological_constant)
    if not np.isfinite(mass) or not np.isfinite(lam):
        raise ValidationError("parameters must be finite")
    if mass < 0:
        raise ValidationError("mass must be nonnegative")

    if kind is Kind.MINKOWSKI:
        return StaticReference(kind)

    if kind is Kind.SCHWARZSCHILD:
        if mass == 0:
            return StaticReference(kind, 0.0, 0.0, 0.0, np.inf, None)
        return StaticReference(kind, mass, 0.0, 2.0 * mass, np.inf, 2.0 * mass)

    if kind is Kind.SCHWARZSCHILD_LAMBDA:
        roots = _sds_roots(mass, lam)
        if mass == 0:
            inner = None
            r_min = 0.0
            outer = roots[0] if lam > 0 and roots else None
        else:
            if not roots:
                raise ValidationError(
                    "no region with V > 0 for these parameters",
                    mass=mass,
                    cosmological_constant=lam,
                )
            inner = roots[0]
            r_min = inner
            outer = roots[1] if lam > 0 and len(roots) > 1 else None
            if lam > 0 and outer is None:
                raise ValidationError(
                    "no region with V > 0 for these parameters",
                    mass=mass,
                    cosmological_constant=lam,
                )
        r_max = outer if outer is not None else np.inf
        return StaticReference(kind, mass, lam, r_min, r_max, inner, outer)

    # custom
    if table is None:
        raise ValidationError("custom reference requires a radial table")
    R = np.asarray(table["R"], dtype=float)
    V = np.asarray(table["V"], dtype=float)
    f = table.get("f")
    if R.ndim != 1 or R.size < 4 or V.shape != R.shape:
        raise ValidationError("radial table needs at least 4 rows of (R, V)")
    if not np.all(np.diff(R) > 0):
        raise ValidationError("radial table must be strictly increasing in R")
    if not (np.all(np.isfinite(R)) and np.all(np.isfinite(V))):
        raise ValidationError("radial table contains non-finite entries")
    spline_V = CubicSpline(R, V, bc_type="not-a-knot")
    spline_f = None
    if f is not None:
        f = np.asarray(f, dtype=float)
        if f.shape != R.shape or not np.all(np.isfinite(f)):
            raise ValidationError("column f does not match the table")
        spline_f = CubicSpline(R, f, bc_type="not-a-knot")
    horizon = None
    r_min = R[0]
    if V[0] <= 0:
        sign_change = np.flatnonzero(V > 0)
        if sign_change.size == 0:
            raise ValidationError("no region with V > 0 in the radial table")
        k = sign_change[0]
        horizon = brentq(spline_V, R[k - 1], R[k], xtol=1e-15)
        r_min = horizon
    if np.any(V[R > r_min] <= 0):
        raise ValidationError("V must stay positive outside the horizon")
    return StaticReference(
        kind, mass, lam, float(r_min), float(R[-1]), horizon, None, spline_V, spline_f
    )


def load_radial_table(path):
    """Read a CSV table with columns ``R, V`` and optionally ``f``.

    A header row is allowed (detected by a non-numeric first field).
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read radial table: {exc}") from None
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if rows:
        try:
            float(rows[0].split(",")[0])
        except ValueError:
            rows = rows[1:]
    try:
        data = np.array([[float(v) for v in ln.split(",")] for ln in rows])
    except ValueError:
        raise ValidationError("radial table must contain numeric CSV rows") from None
    if data.ndim != 2 or data.shape[1] not in (2, 3):
        raise ValidationError("radial table must have two or three columns")
    table = {"R": data[:, 0], "V": data[:, 1]}
    if data.shape[1] == 3:
        table["f"] = data[:, 2]
    return table


@dataclass(frozen=True)
class CurvatureBundle:
    """Coordinate-frame curvature data at a point ``(R, u)``.

    Index order is ``(R, u, phi)`` everywhere.  ``christoffel[k, i, j]`` is
    ``Gamma^k_ij``.
    """

    R: float
    u: float
    metric: np.ndarray
    christoffel: np.ndarray
    ricci: np.ndarray
    hessian_V: np.ndarray
    laplacian_V: float
    grad_V: np.ndarray
    V: float

    def trace_consistency(self):
        ginv = np.linalg.inv(self.metric)
        return float(abs(np.einsum("ij,ij->", ginv, self.hessian_V) - self.laplacian_V))


def _christoffel(ref, R, u):
    F, dF = float(ref.F(R)), float(ref.dF(R))
    s, c = np.sin(u), np.cos(u)
    G = np.zeros((3, 3, 3))
    G[0, 0, 0] = -dF / (2.0 * F)
    G[0, 1, 1] = -R * F
    G[0, 2, 2] = -R * F * s**2
    G[1, 0, 1] = G[1, 1, 0] = 1.0 / R
    G[1, 2, 2] = -s * c
    G[2, 0, 2] = G[2, 2, 0] = 1.0 / R
    G[2, 1, 2] = G[2, 2, 1] = c / s
    return G


def curvature_at(ref, point):
    R, u = (float(v) for v in point)
    ref.require_inside(np.array([R]), "sample point")
    if not (0.0 < u < np.pi):
        raise DomainError("polar angle must lie strictly inside (0, pi)")
    F = float(ref.F(R))
    scale = np.array([1.0 / F, R**2, R**2 * np.sin(u) ** 2])
    ric_rr, ric_tt = (float(v) for v in ref.ricci_orthonormal(R))
    h_rr, h_tt = (float(v) for v in ref.hessian_V_orthonormal(R))
    return CurvatureBundle(
        R=R,
        u=u,
        metric=np.diag(scale),
        christoffel=_christoffel(ref, R, u),
        ricci=np.diag(scale * np.array([ric_rr, ric_tt, ric_tt])),
        hessian_V=np.diag(scale * np.array([h_rr, h_tt, h_tt])),
        laplacian_V=float(ref.laplacian_V(R)),
        grad_V=np.array([float(ref.dV(R)), 0.0, 0.0]),
        V=float(ref.V(R)),
    )


def default_sample_points(ref, count=100, seed=0, margin=0.02):
    """Deterministic random points ``(R, u)`` well inside the domain."""
    rng = np.random.default_rng(seed)
    lo = ref.r_min if ref.r_min > 0 else 0.05
    lo = lo * (1.0 + margin) if ref.r_min > 0 else lo
    hi = ref.r_max * (1.0 - margin) if np.isfinite(ref.r_max) else max(10.0, 10.0 * lo)
    R = rng.uniform(lo, hi, count)
    u = rng.uniform(0.1, np.pi - 0.1, count)
    return np.column_stack([R, u])


def check_vacuum_static(ref, cosmological_constant=0.0, points=None, seed=0):
    """Residuals of the Lambda-vacuum static equations over sample points."""
    lam = float(cosmological_constant)
    if points is None:
        points = default_sample_points(ref, seed=seed)
    R = np.asarray(points, dtype=float)[:, 0]
    ref.require_inside(R, "sample point")
    V = ref.V(R)
    h_rr, h_tt = ref.hessian_V_orthonormal(R)
    ric_rr, ric_tt = ref.ricci_orthonormal(R)
    tensor = np.maximum(
        np.abs(-lam * V - h_rr + V * ric_rr), np.abs(-lam * V - h_tt + V * ric_tt)
    )
    scalar = np.abs(ref.laplacian_V(R) + lam * V)
    sc = ref.scalar_curvature(R)
    report = {
        "tensor_residual": float(tensor.max()),
        "scalar_residual": float(scalar.max()),
        "scalar_curvature_spread": float(sc.max() - sc.min()),
        "scalar_curvature_mean": float(sc.mean()),
        "horizon_gradient": {},
        "points": int(R.size),
    }
    for name, rh in (("inner", ref.horizon), ("outer", ref.outer_horizon)):
        if rh is None:
            continue
        if ref.closed_form:
            # |grad V| = f |V'| = |F'|/2 at F = 0; identical at every (u, phi)
            samples = np.full(8, abs(float(ref.dF(rh))) / 2.0)
        else:
            samples = np.full(8, np.nan)
        report["horizon_gradient"][name] = {
            "radius": float(rh),
            "value": float(samples.mean()),
            "spread": float(np.ptp(samples)),
        }
    return report


def null_convergence_min_eig(ref, points=None, seed=0):
    """Smallest eigenvalue of ``Q v = lambda g v`` over the sample points."""
    if points is None:
        points = default_sample_points(ref, seed=seed)
    lowest = np.inf
    for R, u in np.asarray(points, dtype=float):
        if np.sin(u) < 1e-6:
            u = 0.5 * np.pi  # coordinate singularity at the axis; Q is axially symmetric
        cb = curvature_at(ref, (R, u))
        Q = cb.laplacian_V * cb.metric - cb.hessian_V + cb.V * cb.ricci
        Q = 0.5 * (Q + Q.T)
        eig = scipy.linalg.eigh(Q, cb.metric, eigvals_only=True)
        lowest = min(lowest, float(eig.min()))
    return lowest
