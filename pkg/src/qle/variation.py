"""First and second variations of the quasi-local energy along isometric families."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import surface as sk
from .embedding import (
    SpacetimeEmbedding,
    gauge_quantities,
    isometric_embed_axisym,
    project_surface,
    slice_displacement,
    slice_variation,
)
from .energy import (
    energy_density,
    isometry_mismatch,
    physical_data_from_static,
    quasilocal_energy,
)
from .errors import ConvergenceError, DomainError, GeometryError, PreconditionError, QLEError
from .surface import safe_asinh_ratio

__all__ = [
    "VariationDirection",
    "FirstVariationReport",
    "variation_direction",
    "first_variation_density",
    "directional_derivative",
    "IsometricFamily",
    "isometric_family",
    "axial_gauge",
    "fd_directional_derivative",
    "second_variation_form",
    "jacobi_operator",
    "second_variation",
    "optimize_tau",
    "displaced_embedding",
    "variation_identity_suite",
]


@dataclass(frozen=True, eq=False)
class VariationDirection:
    """Variation ``(dtau, dX)`` with the slice part from the linearized isometry system."""

    dtau: np.ndarray
    dR: np.ndarray
    dq: np.ndarray
    dV: np.ndarray
    beta: np.ndarray
    P_u: np.ndarray  # contravariant P^u
    dshift: float = 0.0


def variation_direction(emb, dtau, dshift=0.0):
    dtau = np.asarray(dtau, dtype=float)
    dR, dq = slice_variation(emb, dtau, dshift)
    beta, Pu = slice_displacement(emb, dR, dq)
    dV = emb.reference.dV(emb.R) * dR
    return VariationDirection(dtau, dR, dq, dV, beta, Pu, float(dshift))


@dataclass(frozen=True, eq=False)
class FirstVariationReport:
    E_V: np.ndarray
    E_tau: np.ndarray
    rho: np.ndarray
    sigma: sk.SurfaceMetric
    dE_ds: float | None = None
    direction: VariationDirection | None = field(default=None, repr=False)

    def pair(self, dV, dtau):
        """``(1/8 pi) int (E_V dV + E_tau dtau) dSigma``."""
        return sk.integrate(self.sigma, self.E_V * dV + self.E_tau * dtau) / (8.0 * np.pi)


def first_variation_density(data, emb):
    rho = energy_density(data, emb)
    gd = gauge_quantities(emb)
    sigma, V = gd.sigma, gd.V
    phi = safe_asinh_ratio(rho * gd.B, gd.normH0 * data.normH)
    dphi = emb.grid.du_even(phi)
    dalpha = data.alpha_H - gd.alpha_H0
    E_V = (
        rho * V * (1.0 + 2.0 * V**2 * gd.grad_tau_sq)
        - 2.0 * V * gd.grad_tau_u * dphi
        + 2.0 * V * dalpha * gd.grad_tau_u
    )
    flux = (V**2 * dphi - V**2 * dalpha) / sigma.suu - rho * V**4 * gd.grad_tau_u
    E_tau = sk.div(sigma, flux)
    return FirstVariationReport(E_V=E_V, E_tau=E_tau, rho=rho, sigma=sigma)


def directional_derivative(data, emb, dtau, dshift=0.0):
    """Formula value of ``dE/ds`` along ``tau + s dtau`` (with gauge ``dshift``)."""
    rep = first_variation_density(data, emb)
    direction = variation_direction(emb, dtau, dshift)
    value = rep.pair(direction.dV, direction.dtau)
    return FirstVariationReport(
        rep.E_V, rep.E_tau, rep.rho, rep.sigma, dE_ds=value, direction=direction
    )


def axial_gauge(emb):
    """The quantity fixed by the embedding solver's gauge row."""
    g = emb.grid
    return 0.5 * float(np.sum(g.weights * emb.R * emb.cos_theta))


@dataclass(frozen=True, eq=False)
class IsometricFamily:
    s: np.ndarray
    members: list
    failure: dict | None = None
    max_isometry_error: float = 0.0

    @property
    def complete(self):
        return self.failure is None


def isometric_family(data, base, dtau, s_values, dshift=0.0, *, tol=1e-10):
    """Embeddings of ``data.sigma`` with ``tau(s) = tau + s dtau``.

    The axial gauge moves linearly, ``G(s) = G(base) + s dshift``.  Members are
    returned in the order of ``s_values``; the family is truncated at the first
    failing parameter.
    """
    dtau = np.asarray(dtau, dtype=float)
    g0 = axial_gauge(base)
    members, done, worst = [], [], 0.0
    for s in s_values:
        s = float(s)
        try:
            emb = isometric_embed_axisym(
                data.sigma,
                base.reference,
                base.tau + s * dtau,
                guess=base,
                gauge_shift=g0 + s * dshift,
                tol=tol,
            )
            err = isometry_mismatch(data.sigma, emb)
        except (ConvergenceError, DomainError, GeometryError) as exc:
            failure = {"s": s, "reason": exc.reason, **exc.details}
            return IsometricFamily(np.array(done), members, failure, worst)
        worst = max(worst, err)
        members.append(emb)
        done.append(s)
    return IsometricFamily(np.array(done), members, None, worst)


def _family_energy(data, base, dtau, s_values, dshift):
    fam = isometric_family(data, base, dtau, s_values, dshift)
    if not fam.complete:
        raise ConvergenceError("isometric family could not be completed", failure=fam.failure)
    return np.array([quasilocal_energy(data, m).energy for m in fam.members])


def fd_directional_derivative(data, base, dtau, h, dshift=0.0, richardson=True):
    """Central difference of ``E(s)``; Richardson-combined with step ``h/2``."""
    steps = [h, -h, h / 2, -h / 2] if richardson else [h, -h]
    E = _family_energy(data, base, dtau, steps, dshift)
    d1 = (E[0] - E[1]) / (2.0 * h)
    if not richardson:
        return d1
    d2 = (E[2] - E[3]) / h
    return (4.0 * d2 - d1) / 3.0


# ---------------------------------------------------------------------------
# second variation


def _require_slice(emb):
    if np.max(np.abs(emb.tau - emb.tau.mean())) > 1e-12:
        raise PreconditionError("surface must lie in a static slice (tau constant)")


def second_variation_form(emb, f):
    """``int [div(V^2 grad f)]^2/(|H0| V) - V^3 h(grad f, grad f) + V^2 |grad f|^2 nu(V)``.

    Evaluated on a slice surface, where ``|H0|`` is its mean curvature and
    ``sigma`` its induced metric.  Returns the integral without the ``1/8 pi``.
    """
    _require_slice(emb)
    proj = project_surface(emb)
    sigma, V, H = proj.metric, proj.V, proj.mean_curvature
    if np.any(H <= 0):
        raise PreconditionError("surface is not mean convex")
    f = np.asarray(f, dtype=float)
    fu = emb.grid.du_even(f)
    grad_u = fu / sigma.suu
    lap = sk.div(sigma, V**2 * grad_u)
    integrand = (
        lap**2 / (H * V) - V**3 * proj.h_uu * grad_u**2 + V**2 * fu * grad_u * proj.nu_V
    )
    return sk.integrate(sigma, integrand)


def ricci_normal(emb, proj=None):
    """``Ric(nu, nu)`` of the slice along the surface."""
    proj = project_surface(emb) if proj is None else proj
    ric_r, ric_t = emb.reference.ricci_orthonormal(emb.R)
    return _bilinear_nn(emb, proj, ric_r, ric_t)


def _bilinear_nn(emb, proj, b_r, b_t):
    F = emb.reference.F(emb.R)
    return b_r * F * proj.n_R**2 + b_t * proj.n_Theta**2 / emb.R**2


def _bilinear_un(emb, proj, b_r, b_t):
    k = emb.kinematics
    return b_r * k.Ru * proj.n_R + b_t * k.Tu * proj.n_Theta


def jacobi_operator(emb, beta, proj=None):
    """``-Lap(beta) - (|h|^2 + Ric(nu, nu)) beta`` on the projected surface."""
    proj = project_surface(emb) if proj is None else proj
    beta = np.asarray(beta, dtype=float)
    return -sk.laplace(proj.metric, beta) - (proj.h_norm_sq + ricci_normal(emb, proj)) * beta


def _is_sphere_of_symmetry(emb, tol=1e-10):
    return bool(
        np.max(np.abs(emb.R - emb.R.mean())) <= tol * emb.R.mean()
        and np.max(np.abs(emb.q)) <= tol
    )


@dataclass(frozen=True)
class SecondVariationReport:
    quadratic_form: float
    sphere_term: float
    value: float
    fd_value: float | None
    fd_mismatch: float | None
    fd_relative: float | None
    fd_ok: bool | None
    sphere_of_symmetry: bool

    def as_dict(self):
        return dict(self.__dict__)


def second_variation(
    emb, f, dshift=0.0, *, fd_check=True, h=0.02, rel_tol=1e-2, abs_tol=1e-8
):
    """``d^2 E / ds^2`` at ``s = 0`` for ``tau = s f`` and own data of ``emb``.

    The reference surface must lie in the slice.  ``dshift`` moves the axial
    gauge and, on a sphere of symmetry, switches on the non-rigid l=1
    displacement whose contribution ``(1/8 pi) int dV dH`` is added.
    """
    _require_slice(emb)

    f = np.asarray(f, dtype=float)
    quad = second_variation_form(emb, f) / (8.0 * np.pi)
    direction = variation_direction(emb, f, dshift)
    proj = project_surface(emb)
    extra = sk.integrate(proj.metric, direction.dV * jacobi_operator(emb, direction.beta, proj))
    extra /= 8.0 * np.pi
    value = quad + extra
    fd = mismatch = rel = fd_ok = None
    if fd_check:
        data = physical_data_from_static(emb.reference, emb)
        steps = [h, -h, h / 2, -h / 2]
        E = _family_energy(data, emb, f, steps, dshift)
        E0 = quasilocal_energy(data, emb).energy
        d_h = (E[0] - 2.0 * E0 + E[1]) / h**2
        d_h2 = (E[2] - 2.0 * E0 + E[3]) / (h / 2) ** 2
        fd = (4.0 * d_h2 - d_h) / 3.0
        mismatch = abs(fd - value)
        rel = mismatch / max(abs(value), abs(fd), 1e-12)
        fd_ok = bool(rel <= rel_tol or mismatch <= abs_tol)
    return SecondVariationReport(
        quadratic_form=float(quad),
        sphere_term=float(extra),
        value=float(value),
        fd_value=None if fd is None else float(fd),
        fd_mismatch=None if mismatch is None else float(mismatch),
        fd_relative=None if rel is None else float(rel),
        fd_ok=fd_ok,
        sphere_of_symmetry=_is_sphere_of_symmetry(emb),
    )


# ---------------------------------------------------------------------------
# descent on tau


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    embedding: SpacetimeEmbedding
    coefficients: np.ndarray  # Legendre coefficients of tau, l = 0..lmax
    energy: float
    gradient: np.ndarray  # dE/dc_l for l = 1..lmax
    converged: bool
    iterations: int
    history: list
    residuals: dict
    reason: str = ""


def _mode_gradient(data, emb, lmax):
    rep = first_variation_density(data, emb)
    grad = np.empty(lmax)
    eye = np.eye(lmax + 1)
    for ell in range(1, lmax + 1):
        mode = sk.legendre_field(emb.grid, eye[ell])
        dR, _ = slice_variation(emb, mode)
        grad[ell - 1] = rep.pair(emb.reference.dV(emb.R) * dR, mode)
    return grad, rep


def _preconditioner(emb, lmax):
    """Diagonal estimate of the energy Hessian on Legendre modes."""
    proj = project_surface(emb)
    r2 = proj.metric.area / (4.0 * np.pi)
    V, H = proj.V, proj.mean_curvature
    scale = float(np.mean(V**3 / H)) / (2.0 * r2)
    ell = np.arange(1, lmax + 1)
    return scale * (ell * (ell + 1.0)) ** 2 / (2.0 * ell + 1.0)


def optimize_tau(
    data,
    reference,
    tau0=None,
    *,
    lmax=8,
    tol=1e-6,
    max_iter=50,
    guess=None,
    armijo=1e-4,
    max_halvings=30,
):
    """Preconditioned projected-gradient descent of ``E`` over ``tau``.

    ``tau`` is restricted to Legendre modes ``1..lmax`` (the constant mode does
    not enter ``E``).  Each trial step re-solves the isometric embedding.
    """
    grid = data.grid
    if tau0 is None:
        coeffs = np.zeros(lmax + 1)
    else:
        coeffs = sk.legendre_coefficients(grid, np.asarray(tau0, dtype=float))[: lmax + 1].copy()
        coeffs = np.pad(coeffs, (0, lmax + 1 - coeffs.size))
    coeffs[0] = 0.0

    def solve(c, start):
        return isometric_embed_axisym(
            data.sigma,
            reference,
            sk.legendre_field(grid, c),
            guess=start,
            gauge_shift=0.0 if start is None else axial_gauge(start),
        )

    emb = solve(coeffs, guess)
    energy = quasilocal_energy(data, emb).energy
    history = []
    converged, reason = False, "max iterations"
    it = 0
    for it in range(1, max_iter + 1):
        grad, rep = _mode_gradient(data, emb, lmax)
        gnorm = float(np.max(np.abs(grad)))
        history.append({"iteration": it, "energy": energy, "gradient_norm": gnorm})
        if gnorm <= tol:
            converged, reason = True, "gradient below tolerance"
            break
        step = -grad / _preconditioner(emb, lmax)
        slope = float(grad @ step)
        lam, accepted = 1.0, False
        for _ in range(max_halvings):
            trial = coeffs.copy()
            trial[1:] += lam * step
            try:
                cand = solve(trial, emb)
                e_new = quasilocal_energy(data, cand).energy
            except QLEError:
                lam *= 0.5
                continue
            if e_new <= energy + armijo * lam * slope:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            reason = "line search failed"
            break
        coeffs, emb, energy = trial, cand, e_new
    else:
        grad, rep = _mode_gradient(data, emb, lmax)
        gnorm = float(np.max(np.abs(grad)))
        converged = gnorm <= tol
        if converged:
            reason = "gradient below tolerance"
    E_tau_modes = sk.legendre_coefficients(grid, rep.E_tau)[1 : lmax + 1]
    residuals = {
        "gradient_norm": gnorm,
        "E_tau_sup": float(np.max(np.abs(rep.E_tau))),
        "E_tau_modes_sup": float(np.max(np.abs(E_tau_modes))),
        "E_V_sup": float(np.max(np.abs(rep.E_V))),
    }
    return OptimizationResult(
        embedding=emb,
        coefficients=coeffs,
        energy=energy,
        gradient=grad,
        converged=converged,
        iterations=it,
        history=history,
        residuals=residuals,
        reason=reason,
    )


# ---------------------------------------------------------------------------
# slice variation identities


def displaced_embedding(emb, beta, P_u, s):
    """Slice profile moved to ``X + s (beta nu + P^u dX/du)`` in coordinates."""
    proj = project_surface(emb)
    k = emb.kinematics
    g = emb.grid
    beta = np.asarray(beta, dtype=float)
    P_u = np.asarray(P_u, dtype=float)
    dR = beta * proj.nu_R + P_u * k.Ru
    dTheta = beta * proj.nu_Theta + P_u * k.Tu
    # cos(Theta + s dTheta) expanded so that the (1 - x^2) factor divides exactly
    shift = s * dTheta
    q = (
        emb.q
        - 2.0 * k.c * np.sin(shift / 2.0) ** 2 / g.one_minus_x2
        - np.sqrt(k.D) * np.sin(shift) / g.sin_u
    )
    return SpacetimeEmbedding(emb.reference, g, emb.R + s * dR, q, emb.tau)


def _richardson_derivative(fn, h):
    a = (fn(h) - fn(-h)) / (2.0 * h)
    b = (fn(h / 2) - fn(-h / 2)) / h
    return (4.0 * b - a) / 3.0, a, b


def variation_identity_suite(emb, beta, P_u, h=1e-3):
    """Check the slice variation formulas for ``dX = beta nu + P^u dX/du``."""
    _require_slice(emb)
    ref = emb.reference
    proj = project_surface(emb)
    sig = proj.metric
    g = emb.grid
    beta = np.asarray(beta, dtype=float)
    P_u = np.asarray(P_u, dtype=float)
    V, H = proj.V, proj.mean_curvature

    def metric_at(s):
        m = project_surface(displaced_embedding(emb, beta, P_u, s)).metric
        return np.concatenate([m.suu, m.b])

    def mean_curv_at(s):
        return project_surface(displaced_embedding(emb, beta, P_u, s)).mean_curvature

    # metric variation
    P_low = P_u * sig.suu
    d_suu = g.du_even(sig.suu)
    formula_uu = 2.0 * beta * proj.h_uu + 2.0 * g.du_odd(P_low) - P_u * d_suu
    formula_pp = 2.0 * beta * proj.h_pp + P_u * g.du_even(sig.spp)
    formula_metric = np.concatenate([formula_uu, formula_pp / g.one_minus_x2])
    fd_metric, m1, m2 = _richardson_derivative(metric_at, h)

    # mean curvature variation
    ric_nn = ricci_normal(emb, proj)
    dH = -sk.laplace(sig, beta) - ric_nn * beta - proj.h_norm_sq * beta + P_u * g.du_even(H)
    fd_H, a1, a2 = _richardson_derivative(mean_curv_at, h)
    e1, e2 = np.max(np.abs(a1 - dH)), np.max(np.abs(a2 - dH))
    order = float(np.log2(e1 / e2)) if e2 > 0 and e1 > 0 else float("inf")

    # integrated identities from the static equations
    q_r, q_t = ref.null_energy_orthonormal(emb.R)
    ric_r, ric_t = ref.ricci_orthonormal(emb.R)
    hv_r, hv_t = ref.hessian_V_orthonormal(emb.R)
    normal_lhs = sk.integrate(sig, proj.nu_V * beta * H)
    normal_rhs = sk.integrate(sig, V * (-sk.laplace(sig, beta) - ric_nn * beta))
    normal_expected = sk.integrate(sig, beta * _bilinear_nn(emb, proj, q_r, q_t))

    ric_un = _bilinear_un(emb, proj, ric_r, ric_t)
    tang_lhs = sk.integrate(sig, proj.nu_V * sk.div(sig, P_u))
    hP = proj.h_uu * P_u / sig.suu
    tang_rhs = sk.integrate(sig, V * (sk.div(sig, hP) - ric_un * P_u))
    mixed = _bilinear_un(emb, proj, V * ric_r - hv_r, V * ric_t - hv_t)
    tang_expected = sk.integrate(sig, mixed * P_u)

    return {
        "metric_variation": {
            "absolute": float(np.max(np.abs(fd_metric - formula_metric))),
            "scale": float(np.max(np.abs(formula_metric))),
        },
        "mean_curvature_variation": {
            "absolute": float(np.max(np.abs(fd_H - dH))),
            "central_error_h": float(e1),
            "central_error_h2": float(e2),
            "observed_order": order,
            "scale": float(np.max(np.abs(dH))),
        },
        "normal_identity": {
            "lhs": normal_lhs,
            "rhs": normal_rhs,
            "mismatch": abs(normal_lhs - normal_rhs),
            "expected_mismatch": normal_expected,
            "residual": abs((normal_lhs - normal_rhs) - normal_expected),
        },
        "tangential_identity": {
            "lhs": tang_lhs,
            "rhs": tang_rhs,
            "mismatch": abs(tang_lhs - tang_rhs),
            "expected_mismatch": tang_expected,
            "residual": abs((tang_lhs - tang_rhs) - tang_expected),
        },
    }
