"""Radial domains in a static slice: the weighted Reilly identity and its uses.

Domains are shells ``R_in < R < R_out`` (or balls around a regular center).
Bulk fields are sampled on Chebyshev-Lobatto nodes in a radial variable
``zeta`` times Gauss-Legendre nodes in ``x = cos u``.  Near a horizon
``R = R_h + zeta^2``, which makes ``V``, ``dR/f`` and solutions of the static
Dirichlet problem smooth in ``zeta``.  Radial quadrature interpolates to
Gauss-Legendre nodes in ``zeta`` so endpoint singularities are never sampled.

A horizon boundary is approached through a collar: quantities are computed on
``zeta >= collar`` (with the collar sphere as inner boundary) and, where the
limit is wanted, extrapolated to ``collar -> 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy import linalg

from . import surface as sk
from .embedding import project_surface
from .errors import PreconditionError, QLEError, ValidationError
from .reference import null_convergence_min_eig
from .variation import _require_slice, jacobi_operator, second_variation_form

__all__ = [
    "ReillyDomain",
    "make_domain",
    "reilly_identity_sides",
    "reilly_function_sides",
    "DirichletSolution",
    "dirichlet_solve",
    "dirichlet_residual",
    "collar_extrapolation",
    "positivity_functional",
    "cmc_stability_eigen",
]

HORIZON, SPHERE, CENTER = "horizon", "sphere", "center"


def chebyshev_lobatto(n, a, b):
    """Ascending Lobatto nodes on ``[a, b]`` and the differentiation matrix."""
    t = -np.cos(np.pi * np.arange(n) / (n - 1))
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n)
    dt = t[:, None] - t[None, :]
    np.fill_diagonal(dt, 1.0)
    dm = (c[:, None] / c[None, :]) / dt
    np.fill_diagonal(dm, 0.0)
    np.fill_diagonal(dm, -dm.sum(axis=1))
    half = 0.5 * (b - a)
    return a + half * (t + 1.0), dm / half


def lobatto_interpolation(nodes, targets):
    """Barycentric interpolation matrix from Lobatto ``nodes`` to ``targets``."""
    n = nodes.size
    w = (-1.0) ** np.arange(n)
    w[0] *= 0.5
    w[-1] *= 0.5
    diff = targets[:, None] - nodes[None, :]
    exact = np.isclose(diff, 0.0, rtol=0.0, atol=1e-15)
    diff[exact] = 1.0
    mat = w[None, :] / diff
    mat /= mat.sum(axis=1, keepdims=True)
    rows = np.flatnonzero(exact.any(axis=1))
    for r in rows:
        mat[r] = exact[r].astype(float)
    return mat


@dataclass(frozen=True, eq=False)
class ReillyDomain:
    """Shell ``zeta_in + collar <= zeta <= zeta_out`` in a static slice.

    ``inner`` is ``"horizon"`` (``V = 0`` at ``zeta = 0``), ``"sphere"`` (an
    artificial inner boundary, a testing device) or ``"center"`` (a ball).
    """

    reference: object
    r_in: float
    r_out: float
    inner: str
    grid: sk.AxiGrid
    n_r: int = 64
    collar: float = 0.0

    def __post_init__(self):
        if self.inner not in (HORIZON, SPHERE, CENTER):
            raise ValidationError("inner boundary must be horizon, sphere or center")
        if self.n_r < 8:
            raise ValidationError("radial resolution must be at least 8")
        if not self.r_out > self.r_in:
            raise ValidationError("domain needs r_out > r_in")
        if self.collar < 0 or self.collar >= self.zeta_out - self.zeta_in:
            raise ValidationError("collar must lie inside the radial interval")
        ref = self.reference
        if self.inner == HORIZON:
            if ref.horizon is None or abs(self.r_in - ref.horizon) > 1e-12 * ref.horizon:
                raise ValidationError("inner radius is not the horizon of the reference")
            if abs(float(ref.V(self.r_in))) > 1e-10:
                raise ValidationError("V does not vanish on the horizon boundary")
            if self.collar <= 0:
                raise ValidationError("horizon domains need a positive collar")
        elif self.inner == CENTER:
            if self.r_in != 0.0 or ref.r_min > 0.0:
                raise ValidationError("a center needs r_in = 0 in a reference regular there")
        else:
            ref.require_inside(np.array([self.r_in]), "inner radius")
        ref.require_inside(np.array([self.r_out]), "outer radius")

    # -- radial variable -------------------------------------------------

    @property
    def zeta_in(self):
        return 0.0 if self.inner in (HORIZON, CENTER) else self.r_in

    @property
    def zeta_out(self):
        if self.inner == HORIZON:
            return float(np.sqrt(self.r_out - self.r_in))
        return self.r_out

    def radius(self, zeta):
        if self.inner == HORIZON:
            return self.r_in + zeta**2
        return np.asarray(zeta, dtype=float)

    def dradius(self, zeta):
        if self.inner == HORIZON:
            return 2.0 * zeta
        return np.ones_like(np.asarray(zeta, dtype=float))

    def with_collar(self, collar):
        return replace(self, collar=float(collar))

    @property
    def labels(self):
        return {
            "inner": self.inner,
            "artificial_inner_sphere": self.inner == SPHERE,
            "r_in": self.r_in,
            "r_out": self.r_out,
            "collar": self.collar,
        }

    # -- discretization --------------------------------------------------

    @cached_property
    def lobatto(self):
        return chebyshev_lobatto(self.n_r, self.zeta_in + self.collar, self.zeta_out)

    @cached_property
    def gauss(self):
        a, b = self.zeta_in + self.collar, self.zeta_out
        t, w = npleg.leggauss(self.n_r)
        return a + 0.5 * (b - a) * (t + 1.0), 0.5 * (b - a) * w

    @cached_property
    def to_gauss(self):
        return lobatto_interpolation(self.lobatto[0], self.gauss[0])

    def sample(self, fn):
        """Evaluate ``fn(R, x)`` on the Lobatto x Legendre tensor grid."""
        zeta = self.lobatto[0]
        R = self.radius(zeta)[:, None]
        x = self.grid.x[None, :]
        out = fn(R * np.ones_like(x), x * np.ones_like(R))
        if isinstance(out, tuple):
            return tuple(np.asarray(o, dtype=float) for o in out)
        return np.asarray(out, dtype=float)

    def radial_factors(self, zeta):
        """``(R, F, f, V, V', F', R'/f)`` at ``zeta``; ``R'/f`` stays smooth at a horizon."""
        ref = self.reference
        R = self.radius(zeta)
        F, dF = ref.F(R), ref.dF(R)
        V, dV = ref.V(R), ref.dV(R)
        if self.inner == HORIZON:
            gap = ref.F_over_gap(R)
            f = zeta * np.sqrt(gap)
            jac = 2.0 / np.sqrt(gap)
        else:
            f = ref.f(R)
            jac = 1.0 / f
        return R, F, f, V, dV, dF, jac


def make_domain(reference, r_out, *, r_in=None, inner=None, n_u=64, n_r=64, collar=None):
    """Domain bounded by the coordinate sphere ``r_out``.

    Without ``r_in`` the inner boundary is the horizon if the reference has one,
    else the center.
    """
    if inner is None:
        if r_in is not None and (reference.horizon is None or r_in != reference.horizon):
            inner = SPHERE if r_in > 0 else CENTER
        elif reference.horizon is not None:
            inner = HORIZON
        elif reference.r_min == 0.0:
            inner = CENTER
        else:
            raise ValidationError("reference has neither a horizon nor a regular center")
    if inner == HORIZON:
        r_in = reference.horizon
        if collar is None:
            collar = 1e-2 * np.sqrt(r_out - r_in)
    elif inner == CENTER:
        r_in = 0.0
    if r_in is None:
        raise ValidationError("an inner sphere needs r_in")
    return ReillyDomain(
        reference, float(r_in), float(r_out), inner, sk.make_grid(n_u), n_r, float(collar or 0.0)
    )


# ---------------------------------------------------------------------------
# bulk and boundary integrands


@dataclass(frozen=True, eq=False)
class _OneFormData:
    """``Y = Y_R dR + Y_x dx`` and its first derivatives on the Lobatto grid."""

    Y_R: np.ndarray
    Y_x: np.ndarray
    dR_Y_R: np.ndarray
    dR_Y_x: np.ndarray
    dx_Y_R: np.ndarray
    dx_Y_x: np.ndarray


def _one_form_data(dom, Y_R, Y_x):
    zeta, dz = dom.lobatto
    Rp = dom.dradius(zeta)[:, None]
    Dx = dom.grid.dx_matrix
    return _OneFormData(
        Y_R=Y_R,
        Y_x=Y_x,
        dR_Y_R=(dz @ Y_R) / Rp,
        dR_Y_x=(dz @ Y_x) / Rp,
        dx_Y_R=Y_R @ Dx.T,
        dx_Y_x=Y_x @ Dx.T,
    )


def _bulk_terms(dom, yd):
    """Bulk integrals of the identity, term by term."""
    zg, wz = dom.gauss
    I = dom.to_gauss
    Y_R, Y_x = I @ yd.Y_R, I @ yd.Y_x
    aRR, aRx = I @ yd.dR_Y_R, I @ yd.dR_Y_x
    axR, axx = I @ yd.dx_Y_R, I @ yd.dx_Y_x
    R, F, f, V, dV, dF, jac = (np.asarray(v)[:, None] for v in dom.radial_factors(zg))
    x = dom.grid.x[None, :]
    omx = 1.0 - x**2
    s = np.sqrt(omx)

    T11 = F * aRR + 0.5 * dF * Y_R
    T12 = -(f / R) * s * (aRx - Y_x / R)
    T21 = -(f / R) * s * (axR - Y_x / R)
    T22 = (-x * Y_x + omx * axx + R * F * Y_R) / R**2
    T33 = F * Y_R / R - x * Y_x / R**2
    sym_sq = T11**2 + T22**2 + T33**2 + 0.5 * (T12 + T21) ** 2
    div = T11 + T22 + T33
    curl = aRx / V**2 - 2.0 * Y_x * dV / V**3 - axR / V**2
    curl_sq = 2.0 * F * omx * curl**2 / R**2

    q_r, q_t = dom.reference.null_energy_orthonormal(R)
    QYY = q_r * F * Y_R**2 + q_t * omx * Y_x**2 / R**2

    measure = 2.0 * np.pi * (wz[:, None] * R**2 * jac) * dom.grid.weights[None, :]

    def integ(a):
        return float(np.sum(measure * a))

    return {
        "Q": integ(QYY / V**2),
        "symmetric": integ(sym_sq / V),
        "divergence": -integ(div**2 / V),
        "divergence_unweighted": -integ(div**2),
        "curl": -integ(V**3 * curl_sq / 4.0),
        "curl_sup": float(np.max(np.sqrt(0.5 * curl_sq))),
    }


def _boundary_terms(dom, yd, which):
    """Boundary integral on the outer (``which=+1``) or inner (``-1``) sphere."""
    idx = -1 if which > 0 else 0
    zeta = dom.lobatto[0][idx]
    R, F, f, V, dV, dF, _ = (float(v) for v in dom.radial_factors(np.array(zeta)))
    g = dom.grid
    x, omx = g.x, g.one_minus_x2
    Y_R, Y_x = yd.Y_R[idx], yd.Y_x[idx]
    YT_sq = omx * Y_x**2 / R**2
    II = which * f / R * YT_sq
    dVdn = which * f * dV
    Ynu = which * f * Y_R
    H = which * 2.0 * f / R
    div_T = g.dx(omx * Y_x) / R**2
    integrand = -II / V + dVdn * YT_sq / V**2 - H * Ynu**2 / V - 2.0 * div_T * Ynu / V
    total = 2.0 * np.pi * R**2 * float(np.sum(g.weights * integrand))
    return total, {"Ynu": Ynu, "div_T": div_T, "YT_sq": YT_sq, "H": H, "V": V, "R": R, "f": f, "dV": dV}


def _has_inner_boundary(dom):
    return dom.inner == SPHERE or (dom.inner == HORIZON and dom.collar > 0)


def _sides(dom, yd):
    bulk = _bulk_terms(dom, yd)
    outer, _ = _boundary_terms(dom, yd, +1)
    inner = _boundary_terms(dom, yd, -1)[0] if _has_inner_boundary(dom) else 0.0
    return bulk, outer, inner


def reilly_identity_sides(dom, Y):
    """Both sides of the weighted Reilly identity for the one-form ``Y``.

    ``Y`` is a callable ``(R, x) -> (Y_R, Y_x)`` for ``Y = Y_R dR + Y_x dx`` or
    a pair of arrays on the domain's tensor grid.
    """
    Y_R, Y_x = dom.sample(Y) if callable(Y) else (np.asarray(a, dtype=float) for a in Y)
    yd = _one_form_data(dom, Y_R, Y_x)
    bulk, outer, inner = _sides(dom, yd)
    bulk_value = bulk["Q"] + bulk["symmetric"] + bulk["divergence"] + bulk["curl"]
    boundary_value = outer + inner
    return {
        "boundary": boundary_value,
        "bulk": bulk_value,
        "mismatch": abs(boundary_value - bulk_value),
        "boundary_outer": outer,
        "boundary_inner": inner,
        "bulk_terms": {k: bulk[k] for k in ("Q", "symmetric", "divergence", "curl")},
        "domain": dom.labels,
    }


def _function_one_form(dom, f_vals):
    zeta, dz = dom.lobatto
    R = dom.radius(zeta)[:, None]
    Rp = dom.dradius(zeta)[:, None]
    V, dV = dom.reference.V(R), dom.reference.dV(R)
    f_R = (dz @ f_vals) / Rp
    f_x = f_vals @ dom.grid.dx_matrix.T
    return V * f_R - f_vals * dV, V * f_x


def reilly_function_sides(dom, f):
    """Corollary form for ``Y = V grad f - f grad V``.

    ``f`` is a callable ``(R, x) -> values``, an array on the tensor grid or a
    :class:`DirichletSolution`.  The divergence term is reported both with the
    ``1/V`` weight implied by the one-form identity (``bulk``) and without it
    (``bulk_unweighted``).
    """
    if isinstance(f, DirichletSolution):
        f_vals = f.sample(dom)
    elif callable(f):
        f_vals = dom.sample(f)
    else:
        f_vals = np.asarray(f, dtype=float)
    yd = _one_form_data(dom, *_function_one_form(dom, f_vals))
    bulk, outer, inner = _sides(dom, yd)
    base = bulk["Q"] + bulk["symmetric"]
    boundary_value = outer + inner
    weighted = base + bulk["divergence"]
    unweighted = base + bulk["divergence_unweighted"]
    return {
        "boundary": boundary_value,
        "bulk": weighted,
        "mismatch": abs(boundary_value - weighted),
        "bulk_unweighted": unweighted,
        "mismatch_unweighted": abs(boundary_value - unweighted),
        "boundary_outer": outer,
        "boundary_inner": inner,
        "antisymmetric_sup": bulk["curl_sup"],
        "curl_integral": bulk["curl"],
        "domain": dom.labels,
    }


def collar_extrapolation(dom, fn, collars=None):
    """Evaluate ``fn(domain)`` on shrinking collars and extrapolate to zero.

    The observed order ``p`` comes from three collars halving in size; the
    estimate is the Richardson combination of the two smallest.
    """
    if dom.inner != HORIZON:
        raise ValidationError("collar extrapolation applies to horizon domains")
    collars = list(collars or [dom.collar, dom.collar / 2, dom.collar / 4])
    vals = np.array([float(fn(dom.with_collar(c))) for c in collars])
    d1, d2 = vals[0] - vals[1], vals[1] - vals[2]
    stable = d1 != 0 and d2 != 0 and np.sign(d1) == np.sign(d2) and abs(d2) < abs(d1)
    if stable:
        p = float(np.log2(d1 / d2))
        limit = vals[2] + d2 / (2.0**p - 1.0)
    else:
        p, limit = float("nan"), float(vals[-1])
    return {
        "collars": collars,
        "values": vals.tolist(),
        "order": p,
        "limit": float(limit),
        "stable": bool(stable),
    }


# ---------------------------------------------------------------------------
# Dirichlet problem  V Lap f - f Lap V = 0


def _lap_V_over_V(ref, R):
    if ref.closed_form:
        return 0.5 * ref.d2F(R) + ref.dF(R) / R
    return ref.laplacian_V(R) / ref.V(R)


def _radial_coefficients(dom, zeta, ell):
    """``a g'' + b g' + c g`` for the l-th Legendre mode, in ``zeta``."""
    ref = dom.reference
    R = dom.radius(zeta)
    F, dF = ref.F(R), ref.dF(R)
    c = -ell * (ell + 1.0) / R**2 - _lap_V_over_V(ref, R)
    if dom.inner == HORIZON:
        gap = ref.F_over_gap(R)
        a = gap / 4.0
        b = (dF - gap) / (4.0 * zeta) + gap * zeta / R
    else:
        a = F
        b = 0.5 * dF + 2.0 * F / R
    return a, b, c


@dataclass(frozen=True, eq=False)
class DirichletSolution:
    domain: ReillyDomain
    zeta: np.ndarray  # Lobatto nodes on the full interval
    modes: np.ndarray  # (L + 1, n_r) radial profiles g_l(zeta)
    tau_coefficients: np.ndarray

    @property
    def L(self):
        return self.modes.shape[0] - 1

    def radial_values(self, zeta):
        return self.modes @ lobatto_interpolation(self.zeta, np.atleast_1d(zeta)).T

    def evaluate(self, zeta, x):
        """``f`` on the tensor grid ``zeta x x``."""
        g = self.radial_values(zeta)  # (L+1, m)
        P = npleg.legvander(np.atleast_1d(x), self.L)  # (k, L+1)
        return g.T @ P.T

    def sample(self, dom):
        if dom.reference is not self.domain.reference or dom.inner != self.domain.inner:
            raise ValidationError("solution and domain do not match")
        return self.evaluate(dom.lobatto[0], dom.grid.x)


def dirichlet_solve(dom, tau, L=32, n_r=None):
    """Solve ``V Lap f - f Lap V = 0``, ``f = V tau`` on the outer sphere, ``f = 0`` on N.

    ``tau`` is given by its values on ``dom.grid`` or by Legendre coefficients
    (a 1-D array shorter than the grid).  The solve uses the full radial
    interval; the domain collar only affects later quadratures.
    """
    tau = np.asarray(tau, dtype=float)
    if tau.shape == (dom.grid.n,):
        coeffs = dom.grid.coefficients(tau)
    else:
        coeffs = tau
    coeffs = np.pad(coeffs[: L + 1], (0, max(0, L + 1 - coeffs.size)))
    n = n_r or dom.n_r
    zeta, dz = chebyshev_lobatto(n, dom.zeta_in, dom.zeta_out)
    d2 = dz @ dz
    V_out = float(dom.reference.V(dom.r_out))
    modes = np.zeros((L + 1, n))
    interior = slice(1, n - 1)
    for ell in range(L + 1):
        a, b, c = _radial_coefficients(dom, zeta[interior], ell)
        A = np.zeros((n, n))
        A[interior] = a[:, None] * d2[interior] + b[:, None] * dz[interior]
        A[interior, interior] += np.diag(c)
        rhs = np.zeros(n)
        A[-1] = 0.0
        A[-1, -1] = 1.0
        rhs[-1] = V_out * coeffs[ell]
        A[0] = 0.0
        if dom.inner == CENTER and ell == 0:
            A[0] = dz[0]
        else:
            A[0, 0] = 1.0
        try:
            modes[ell] = linalg.solve(A, rhs)
        except linalg.LinAlgError as exc:
            raise QLEError("radial Dirichlet solve is singular", ell=ell) from exc
        if not np.all(np.isfinite(modes[ell])):
            raise QLEError("radial Dirichlet solve is singular", ell=ell)
    return DirichletSolution(dom, zeta, modes, coeffs)


def dirichlet_residual(sol, dom=None):
    """Sup-norm of ``V Lap f - f Lap V`` at interior nodes, from 2-D spectral derivatives."""
    dom = sol.domain if dom is None else dom
    zeta, dz = dom.lobatto
    f = sol.sample(dom)
    ref = dom.reference
    x, omx = dom.grid.x[None, :], dom.grid.one_minus_x2[None, :]
    inner = slice(1, -1)
    z = zeta[inner][:, None]
    R = dom.radius(z)
    d1 = (dz @ f)[inner]
    d2 = (dz @ dz @ f)[inner]
    ang = (omx * (f @ dom.grid.dx_matrix.T)) @ dom.grid.dx_matrix.T
    F, dF = ref.F(R), ref.dF(R)
    if dom.inner == HORIZON:
        gap = ref.F_over_gap(R)
        radial = gap / 4.0 * d2 + ((dF - gap) / (4.0 * z) + gap * z / R) * d1
    else:
        radial = F * d2 + (0.5 * dF + 2.0 * F / R) * d1
    lap_f = radial + ang[inner] / R**2
    V = ref.V(R)
    res = V * lap_f - f[inner] * V * _lap_V_over_V(ref, R)
    return float(np.max(np.abs(res)))


# ---------------------------------------------------------------------------
# positivity functional and stability


@dataclass(frozen=True)
class PositivityReport:
    value: float
    nonnegative: bool
    null_convergence_min_eig: float
    sigma_piece: float | None = None
    bulk_piece: float | None = None
    inner_boundary: float | None = None
    decomposition: float | None = None
    mismatch: float | None = None
    collar: float | None = None

    def as_dict(self):
        return dict(self.__dict__)


def _is_coordinate_sphere(emb):
    R = emb.R
    return bool(np.max(np.abs(R - R.mean())) <= 1e-12 * R.mean() and np.max(np.abs(emb.q)) <= 1e-12)


def positivity_functional(emb, tau, *, cross_check=True, L=32, n_r=64, collar=None, tol=1e-8):
    """``int (div(V^2 grad tau))^2/(VH) - V^3 II(grad tau, grad tau) + V^2 dV/dnu |grad tau|^2``.

    On coordinate spheres the value is cross-checked against the Reilly
    decomposition built from the Dirichlet solution with ``f = V tau`` on the
    surface: the surface square, the bulk terms and (for a collar or an
    artificial inner sphere) the inner boundary integral.
    """
    _require_slice(emb)
    tau = np.asarray(tau, dtype=float)
    value = float(second_variation_form(emb, tau))
    min_eig = float(null_convergence_min_eig(emb.reference))
    holds = min_eig >= -1e-10
    report = dict(value=value, nonnegative=(value >= -tol) or not holds, null_convergence_min_eig=min_eig)
    if not (cross_check and _is_coordinate_sphere(emb)):
        return PositivityReport(**report)

    R0 = float(emb.R.mean())
    dom = make_domain(emb.reference, R0, n_u=emb.grid.n, n_r=n_r, collar=collar)
    sol = dirichlet_solve(dom, tau, L=L)
    f_vals = sol.sample(dom)
    yd = _one_form_data(dom, *_function_one_form(dom, f_vals))
    bulk = _bulk_terms(dom, yd)
    bulk_piece = bulk["Q"] + bulk["symmetric"]
    _, b = _boundary_terms(dom, yd, +1)
    sq = (np.sqrt(b["H"]) * b["Ynu"] + b["div_T"] / np.sqrt(b["H"])) ** 2 / b["V"]
    sigma_piece = 2.0 * np.pi * b["R"] ** 2 * float(np.sum(dom.grid.weights * sq))
    inner = _boundary_terms(dom, yd, -1)[0] if _has_inner_boundary(dom) else 0.0
    decomposition = sigma_piece + bulk_piece - inner
    report.update(
        sigma_piece=sigma_piece,
        bulk_piece=bulk_piece,
        inner_boundary=inner,
        decomposition=decomposition,
        mismatch=abs(decomposition - value),
        collar=dom.collar,
    )
    return PositivityReport(**report)


@dataclass(frozen=True)
class StabilityReport:
    min_eigenvalue: float
    eigenvalues: list
    rayleigh_by_mode: list  # (l, quotient) for single Legendre modes
    stable: bool


def cmc_stability_eigen(emb, lmax=None, *, cmc_tol=1e-8):
    """Smallest eigenvalue of the Jacobi form on mean-zero axisymmetric functions."""
    proj = project_surface(emb)
    H = proj.mean_curvature
    if np.max(np.abs(H - H.mean())) > cmc_tol * max(1.0, abs(H.mean())):
        raise PreconditionError("surface does not have constant mean curvature")
    g = emb.grid
    sig = proj.metric
    lmax = min(g.n - 1, 24) if lmax is None else int(lmax)
    if lmax < 1:
        raise ValidationError("lmax must be at least 1")
    area = sig.area
    basis = []
    for ell in range(1, lmax + 1):
        p = sk.legendre_field(g, np.eye(lmax + 1)[ell])
        basis.append(p - sk.integrate(sig, p) / area)
    basis = np.array(basis)
    m = len(basis)
    K = np.empty((m, m))
    M = np.empty((m, m))
    for i in range(m):
        Jb = jacobi_operator(emb, basis[i], proj)
        for j in range(i, m):
            K[i, j] = K[j, i] = sk.integrate(sig, basis[j] * Jb)
            M[i, j] = M[j, i] = sk.integrate(sig, basis[i] * basis[j])
    K = 0.5 * (K + K.T)
    evals = linalg.eigh(K, M, eigvals_only=True)
    rq = [(ell, float(K[ell - 1, ell - 1] / M[ell - 1, ell - 1])) for ell in range(1, lmax + 1)]
    lam = float(evals[0])
    return StabilityReport(lam, evals.tolist(), rq, lam >= -1e-10)
