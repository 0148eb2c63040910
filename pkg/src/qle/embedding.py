"""Geometry of axisymmetric surfaces embedded in a static reference.

An embedding is described by the time function ``tau(u)`` and the slice
profile ``(R(u), Theta(u))``.  The polar profile is stored through
``cos Theta = x + (1 - x^2) q(x)`` with ``x = cos u``; this keeps the poles
fixed and makes ``sin^2 Theta / sin^2 u = 1 - 2 x q - (1 - x^2) q^2`` an exact
polynomial identity, so no quantity has to be divided by a vanishing sine.

The mean curvature gauge data ``(|H0|, alpha_H0)`` are obtained from slice
quantities only.  :func:`spacetime_frame` recomputes the same objects from the
four dimensional Christoffel symbols; it is independent of the slice formulas
and backs :func:`identity_suite`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import surface as sk
from .errors import ConvergenceError, DomainError, GeometryError, ValidationError
from .reference import V_EPS
from .surface import SurfaceMetric, safe_asinh_ratio

__all__ = [
    "SpacetimeEmbedding",
    "ProjectedSurfaceData",
    "GaugeData",
    "project_surface",
    "induced_metric",
    "gauge_quantities",
    "isometric_embed_axisym",
    "slice_variation",
    "spacetime_frame",
    "identity_suite",
]


@dataclass(frozen=True, eq=False)
class SpacetimeEmbedding:
    reference: object
    grid: sk.AxiGrid
    R: np.ndarray
    q: np.ndarray
    tau: np.ndarray
    solve_info: dict | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        n = self.grid.n
        for name in ("R", "q", "tau"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValidationError(f"{name} does not match the grid")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} must be finite")
            object.__setattr__(self, name, arr)

    @classmethod
    def coordinate_sphere(cls, reference, grid, radius, tau=None):
        tau = np.zeros(grid.n) if tau is None else tau
        return cls(reference, grid, np.full(grid.n, float(radius)), np.zeros(grid.n), tau)

    @classmethod
    def from_profile(cls, reference, grid, R, cos_theta, tau=None):
        x = grid.x
        q = (np.asarray(cos_theta, dtype=float) - x) / grid.one_minus_x2
        tau = np.zeros(grid.n) if tau is None else tau
        return cls(reference, grid, np.asarray(R, dtype=float), q, tau)

    def with_tau(self, tau):
        return replace(self, tau=np.asarray(tau, dtype=float), solve_info=None)

    @property
    def cos_theta(self):
        x = self.grid.x
        return x + self.grid.one_minus_x2 * self.q

    @property
    def Theta(self):
        return np.arccos(np.clip(self.cos_theta, -1.0, 1.0))

    @cached_property
    def kinematics(self):
        return _kinematics(self)


@dataclass(frozen=True)
class _Kinematics:
    Rx: np.ndarray
    Ru: np.ndarray
    Ruu: np.ndarray
    c: np.ndarray
    cx: np.ndarray
    D: np.ndarray
    Tu: np.ndarray  # dTheta/du
    Tuu: np.ndarray
    tau_u: np.ndarray
    tau_uu: np.ndarray


def _kinematics(emb):
    g = emb.grid
    x, omx = g.x, g.one_minus_x2
    R, q = emb.R, emb.q
    Rx = g.dx(R)
    Rxx = g.dx(Rx)
    qx = g.dx(q)
    D = 1.0 - 2.0 * x * q - omx * q**2
    cx = 1.0 - 2.0 * x * q + omx * qx
    if np.any(D <= 0) or np.any(cx <= 0):
        raise GeometryError("profile is not an embedded surface of revolution")
    Tu = cx / np.sqrt(D)
    tx = g.dx(emb.tau)
    return _Kinematics(
        Rx=Rx,
        Ru=-g.sin_u * Rx,
        Ruu=-x * Rx + omx * Rxx,
        c=x + omx * q,
        cx=cx,
        D=D,
        Tu=Tu,
        Tuu=g.du_even(Tu),
        tau_u=-g.sin_u * tx,
        tau_uu=-x * tx + omx * g.dx(tx),
    )


@dataclass(frozen=True, eq=False)
class ProjectedSurfaceData:
    """Extrinsic data of the projected surface in the static slice.

    ``h_pp_ratio`` is ``h_phiphi / sigmahat_phiphi``; ``nu_R``/``nu_Theta``
    are the contravariant components of the outward unit normal and
    ``n_R``/``n_Theta`` the covariant ones.
    """

    metric: SurfaceMetric
    h_uu: np.ndarray
    h_pp_ratio: np.ndarray
    mean_curvature: np.ndarray
    nu_R: np.ndarray
    nu_Theta: np.ndarray
    n_R: np.ndarray
    n_Theta: np.ndarray
    nu_V: np.ndarray
    V: np.ndarray

    @property
    def h_pp(self):
        return self.h_pp_ratio * self.metric.spp

    @property
    def h_norm_sq(self):
        return (self.h_uu / self.metric.suu) ** 2 + self.h_pp_ratio**2

    @property
    def H(self):
        return self.mean_curvature


def project_surface(emb):
    ref = emb.reference
    R = ref.require_inside(emb.R, "surface radius")
    k = emb.kinematics
    g = emb.grid
    F, dF = ref.F(R), ref.dF(R)
    suu = k.Ru**2 / F + R**2 * k.Tu**2
    spp = R**2 * g.one_minus_x2 * k.D
    if np.any(suu <= 0):
        raise GeometryError("degenerate tangent vector on the profile")
    metric = SurfaceMetric(g, suu, spp)
    norm = np.sqrt(F * k.Tu**2 + k.Ru**2 / R**2)
    n_R = k.Tu / norm
    n_T = -k.Ru / norm
    h_uu = -(
        n_R * (k.Ruu - dF / (2.0 * F) * k.Ru**2 - R * F * k.Tu**2)
        + n_T * (k.Tuu + 2.0 * k.Ru * k.Tu / R)
    )
    # n_Theta / sin(Theta) = Rx / (norm sqrt(D)), free of the polar singularity
    h_pp_ratio = n_R * F / R + k.c * k.Rx / (R**2 * norm * np.sqrt(k.D))
    H = h_uu / suu + h_pp_ratio
    if ref.closed_form:
        nu_V = n_R * ref.V(R) * dF / 2.0
    else:
        nu_V = F * n_R * ref.dV(R)
    return ProjectedSurfaceData(
        metric=metric,
        h_uu=h_uu,
        h_pp_ratio=h_pp_ratio,
        mean_curvature=H,
        nu_R=F * n_R,
        nu_Theta=n_T / R**2,
        n_R=n_R,
        n_Theta=n_T,
        nu_V=nu_V,
        V=ref.V(R),
    )


def induced_metric(emb, proj=None):
    """Spacetime metric ``sigma = sigmahat - V^2 dtau^2`` induced on the surface."""
    proj = project_surface(emb) if proj is None else proj
    tau_u = emb.kinematics.tau_u
    suu = proj.metric.suu - proj.V**2 * tau_u**2
    if np.any(suu <= 0):
        raise GeometryError("embedded surface is not spacelike")
    return SurfaceMetric(emb.grid, suu, proj.metric.spp)


@dataclass(frozen=True, eq=False)
class GaugeData:
    sigma: SurfaceMetric
    V: np.ndarray
    A: np.ndarray
    B: np.ndarray
    theta: np.ndarray
    normH0: np.ndarray
    alpha_e3: np.ndarray
    alpha_H0: np.ndarray
    P: np.ndarray  # -<H0, e3>
    W: np.ndarray  # sqrt(1 + V^2 |grad tau|^2)
    grad_tau_u: np.ndarray
    grad_tau_sq: np.ndarray
    tau_u: np.ndarray


def gauge_quantities(emb, proj=None):
    proj = project_surface(emb) if proj is None else proj
    sigma = induced_metric(emb, proj)
    V = proj.V
    tau_u = emb.kinematics.tau_u
    grad_tau_u = tau_u / sigma.suu
    grad_tau_sq = tau_u * grad_tau_u
    W = np.sqrt(proj.metric.suu / sigma.suu)
    A = V * W
    B = sk.div(sigma, V**2 * grad_tau_u)
    alpha_e3 = W * (V * proj.h_uu * tau_u / proj.metric.suu - proj.nu_V * tau_u)
    P = proj.mean_curvature + V * alpha_e3 * grad_tau_u / W
    ratio = np.abs(B) / A
    bad = P <= ratio
    if np.any(bad):
        raise GeometryError(
            "mean curvature not spacelike",
            nodes=np.flatnonzero(bad).tolist(),
            u=emb.grid.u[bad].tolist(),
        )
    normH0 = np.sqrt((P - ratio) * (P + ratio))
    theta = safe_asinh_ratio(-B, normH0 * A)
    alpha_H0 = alpha_e3 - emb.grid.du_even(theta)
    return GaugeData(
        sigma=sigma,
        V=V,
        A=A,
        B=B,
        theta=theta,
        normH0=normH0,
        alpha_e3=alpha_e3,
        alpha_H0=alpha_H0,
        P=P,
        W=W,
        grad_tau_u=grad_tau_u,
        grad_tau_sq=grad_tau_sq,
        tau_u=tau_u,
    )


# ---------------------------------------------------------------------------
# isometric embedding into the static slice


def _V2(ref, R):
    if ref.closed_form:
        return ref.F(R), ref.dF(R)
    V, dV = ref.V(R), ref.dV(R)
    return V**2, 2.0 * V * dV


def _embedding_residual(ref, grid, R, q, tau_x, a_t, b_t, shift):
    x, omx, w = grid.x, grid.one_minus_x2, grid.weights
    Rx, qx = grid.dx(R), grid.dx(q)
    D = 1.0 - 2.0 * x * q - omx * q**2
    cx = 1.0 - 2.0 * x * q + omx * qx
    F = ref.F(R)
    V2, _ = _V2(ref, R)
    r1 = R**2 * D - b_t
    r2 = omx * Rx**2 / F + R**2 * cx**2 / D - V2 * omx * tau_x**2 - a_t
    gauge = 0.5 * np.sum(w * R * (x + omx * q)) - shift
    return np.concatenate([r1, r2, [gauge]])


def _embedding_jacobian(ref, grid, R, q, tau_x):
    x, omx, w = grid.x, grid.one_minus_x2, grid.weights
    Dm = grid.dx_matrix
    Rx, qx = grid.dx(R), grid.dx(q)
    D = 1.0 - 2.0 * x * q - omx * q**2
    dD = -2.0 * x - 2.0 * omx * q
    cx = 1.0 - 2.0 * x * q + omx * qx
    F, dF = ref.F(R), ref.dF(R)
    _, dV2 = _V2(ref, R)
    J11 = np.diag(2.0 * R * D)
    J12 = np.diag(R**2 * dD)
    dr2_dR = -omx * Rx**2 * dF / F**2 + 2.0 * R * cx**2 / D - dV2 * omx * tau_x**2
    J21 = np.diag(dr2_dR) + (2.0 * omx * Rx / F)[:, None] * Dm
    dr2_dq = R**2 * (-4.0 * x * cx / D - cx**2 * dD / D**2)
    J22 = np.diag(dr2_dq) + (2.0 * R**2 * cx * omx / D)[:, None] * Dm
    gauge = np.concatenate([0.5 * w * (x + omx * q), 0.5 * w * R * omx])
    return np.vstack([np.block([[J11, J12], [J21, J22]]), gauge[None, :]])


def _profile_admissible(ref, grid, R, q):
    if not np.all(np.isfinite(R)) or not np.all(np.isfinite(q)):
        return False
    if np.any(R <= ref.r_min) or np.any(R >= ref.r_max):
        return False
    if np.any(ref.V(R) <= V_EPS):
        return False
    x, omx = grid.x, grid.one_minus_x2
    D = 1.0 - 2.0 * x * q - omx * q**2
    cx = 1.0 - 2.0 * x * q + omx * grid.dx(q)
    return bool(np.all(D > 0) and np.all(cx > 0))


def isometric_embed_axisym(
    target,
    ref,
    tau=None,
    guess=None,
    *,
    gauge_shift=0.0,
    tol=1e-9,
    max_iter=60,
):
    """Embed ``target`` (the spacetime metric ``sigma``) with time function ``tau``.

    Solves ``R^2 sin^2 Theta = sigma_phiphi`` and
    ``R'^2/f^2 + R^2 Theta'^2 = sigma_uu + V(R)^2 tau'^2`` at the nodes by
    damped Gauss-Newton.  One extra row fixes the axial position (the
    ``z``-translation in flat space, the non-rigid l=1 mode on spheres of
    symmetry): ``(1/2) int R cos(Theta) dx = gauge_shift``.
    """
    grid = target.grid
    tau = np.zeros(grid.n) if tau is None else np.asarray(tau, dtype=float)
    if tau.shape != (grid.n,):
        raise ValidationError("tau does not match the grid")
    tau_x = grid.dx(tau)
    a_t, b_t = target.a, target.b

    if guess is None:
        r0 = np.sqrt(target.area / (4.0 * np.pi))
        R, q = np.full(grid.n, r0), np.zeros(grid.n)
    elif isinstance(guess, SpacetimeEmbedding):
        R, q = guess.R.copy(), guess.q.copy()
    else:
        R, q = (np.asarray(v, dtype=float).copy() for v in guess)
    if not _profile_admissible(ref, grid, R, q):
        raise DomainError("initial guess lies outside the static domain")

    polish = max(1e-3 * tol, 64 * np.finfo(float).eps * float(np.max(np.abs(a_t))))
    res = _embedding_residual(ref, grid, R, q, tau_x, a_t, b_t, gauge_shift)
    norm = float(np.max(np.abs(res)))
    history = [norm]
    iterations = 0
    while norm > polish and iterations < max_iter:
        J = _embedding_jacobian(ref, grid, R, q, tau_x)
        step = np.linalg.lstsq(J, -res, rcond=None)[0]
        dR, dq = step[: grid.n], step[grid.n :]
        lam = 1.0
        for _ in range(40):
            Rn, qn = R + lam * dR, q + lam * dq
            if _profile_admissible(ref, grid, Rn, qn):
                rn = _embedding_residual(ref, grid, Rn, qn, tau_x, a_t, b_t, gauge_shift)
                nn = float(np.max(np.abs(rn)))
                if nn < norm or (nn <= tol and lam == 1.0):
                    break
            lam *= 0.5
        else:
            if norm <= tol:
                break
            raise ConvergenceError(
                "line search failed in isometric embedding", residual=norm, history=history
            )
        iterations += 1
        if nn >= norm and norm <= tol:
            break
        R, q, res, norm = Rn, qn, rn, nn
        history.append(norm)
        if len(history) > 3 and norm <= tol and history[-2] <= 4.0 * norm:
            break  # stagnated at round-off
    if norm > tol:
        if np.any(R <= ref.r_min * (1 + 1e-3)) or np.any(R >= ref.r_max * (1 - 1e-3)):
            raise DomainError("target is not embeddable in the radial range", residual=norm)
        raise ConvergenceError(
            "isometric embedding did not converge", residual=norm, history=history
        )
    info = {"iterations": iterations, "residual": norm, "history": history}
    return SpacetimeEmbedding(ref, grid, R, q, tau, solve_info=info)


def embedding_residual(emb, target, gauge_shift=0.0):
    """Sup-norm of the isometry equations for an existing embedding."""
    grid = emb.grid
    res = _embedding_residual(
        emb.reference, grid, emb.R, emb.q, grid.dx(emb.tau), target.a, target.b, gauge_shift
    )
    return float(np.max(np.abs(res[:-1])))


def slice_variation(emb, dtau, dshift=0.0):
    """First-order change ``(dR, dq)`` of the profile when ``tau -> tau + s dtau``.

    Solves the linearized isometry system at ``emb`` (the target metric is
    held fixed) together with the linearized axial gauge condition.
    """
    grid = emb.grid
    ref = emb.reference
    tau_x = grid.dx(emb.tau)
    dtau_x = grid.dx(np.asarray(dtau, dtype=float))
    V2, _ = _V2(ref, emb.R)
    rhs = np.concatenate(
        [np.zeros(grid.n), 2.0 * V2 * grid.one_minus_x2 * tau_x * dtau_x, [float(dshift)]]
    )
    J = _embedding_jacobian(ref, grid, emb.R, emb.q, tau_x)
    step = np.linalg.lstsq(J, rhs, rcond=None)[0]
    return step[: grid.n], step[grid.n :]


def slice_displacement(emb, dR, dq):
    """Normal/tangential split ``(beta, P^u)`` of a profile variation ``(dR, dq)``."""
    proj = project_surface(emb)
    k = emb.kinematics
    g = emb.grid
    # dTheta = -d(cos Theta) / sin Theta with sin Theta = sin u sqrt(D)
    dTheta = -g.sin_u * dq / np.sqrt(k.D)
    beta = proj.n_R * dR + proj.n_Theta * dTheta
    F = emb.reference.F(emb.R)
    Pu = (k.Ru * dR / F + emb.R**2 * k.Tu * dTheta) / proj.metric.suu
    return beta, Pu


# ---------------------------------------------------------------------------
# four dimensional oracle


def _lower(ref, R, s2, Y):
    """Lower the index of a 4-vector ``(t, R, Theta)`` (no phi part)."""
    V2, _ = _V2(ref, R)
    return np.stack([-V2 * Y[0], Y[1] / ref.F(R), R**2 * Y[2]])


def _dot(ref, R, X, Y):
    V2, _ = _V2(ref, R)
    return -V2 * X[0] * Y[0] + X[1] * Y[1] / ref.F(R) + R**2 * X[2] * Y[2]


def _gamma_u(ref, R, Xu, Y):
    """``Gamma(X_u, Y)`` for the static metric, ``(t, R, Theta)`` components."""
    V, dV = ref.V(R), ref.dV(R)
    F, dF = ref.F(R), ref.dF(R)
    tu, Ru, Tu = Xu
    return np.stack(
        [
            dV / V * (tu * Y[1] + Ru * Y[0]),
            F * V * dV * tu * Y[0] - dF / (2.0 * F) * Ru * Y[1] - R * F * Tu * Y[2],
            (Ru * Y[2] + Tu * Y[1]) / R,
        ]
    )


def _du_vector(grid, Y):
    return np.stack([grid.du_even(Y[0]), grid.du_even(Y[1]), grid.du_odd(Y[2])])


def spacetime_frame(emb, proj=None):
    """Brute-force 4D extrinsic data of the embedded surface.

    Returns a dict with the mean curvature vector ``H0`` (components
    ``t, R, Theta``), the frame ``e3``/``e4`` (``e4`` constructed as the
    future unit normal orthogonal to ``e3``), the connection one-forms
    ``alpha_e3`` and ``alpha_H0`` and the inner products used by the
    projection relations.
    """
    ref = emb.reference
    proj = project_surface(emb) if proj is None else proj
    g = emb.grid
    k = emb.kinematics
    R = emb.R
    F, dF = ref.F(R), ref.dF(R)
    sinT = g.sin_u * np.sqrt(k.D)

    Xu = np.stack([k.tau_u, k.Ru, k.Tu])
    Xuu = np.stack([k.tau_uu, k.Ruu, k.Tuu])
    suu = _dot(ref, R, Xu, Xu)
    spp = R**2 * sinT**2
    kvec = (Xuu + _gamma_u(ref, R, Xu, Xu)) / suu
    # Gamma(X_phi, X_phi) / sigma_phiphi
    kvec[1] += -F / R
    kvec[2] += -k.c / (R**2 * sinT)
    H0 = kvec - (_dot(ref, R, kvec, Xu) / suu) * Xu
    norm_sq = _dot(ref, R, H0, H0)

    e3 = np.stack([np.zeros(g.n), proj.nu_R, proj.nu_Theta])
    # e4: orthogonal to X_u and e3 (both lowered), timelike, future pointing
    a = _lower(ref, R, None, Xu)
    b = _lower(ref, R, None, e3)
    e4 = np.cross(a.T, b.T).T
    e4 = e4 / np.sqrt(-_dot(ref, R, e4, e4))
    e4 = e4 * np.sign(e4[0])

    h3 = _dot(ref, R, H0, e3)
    h4 = _dot(ref, R, H0, e4)
    normH0 = np.sqrt(norm_sq)
    # H0 = h3 e3 - h4 e4;  J0 = h4 e3 - h3 e4
    J0 = h4 * e3 - h3 * e4

    def conn(Y, Z):
        DY = _du_vector(g, Y) + _gamma_u(ref, R, Xu, Y)
        return _dot(ref, R, DY, Z)

    alpha_e3 = conn(e3, e4)
    alpha_H0 = conn(J0 / normH0, H0 / normH0)

    V = ref.V(R)
    W = np.sqrt(proj.metric.suu / suu)
    grad_hat = (k.tau_u / proj.metric.suu) * np.stack([np.zeros(g.n), k.Ru, k.Tu])
    e4_lemma = W * (np.stack([1.0 / V, np.zeros(g.n), np.zeros(g.n)]) + V * grad_hat)
    grad_tau = (k.tau_u / suu) * Xu
    dt_decomp = V * W * e4 - V**2 * grad_tau
    dt = np.stack([np.ones(g.n), np.zeros(g.n), np.zeros(g.n)])

    return {
        "H0": H0,
        "normH0": normH0,
        "e3": e3,
        "e4": e4,
        "H0_dot_e3": h3,
        "H0_dot_e4": h4,
        "alpha_e3": alpha_e3,
        "alpha_H0": alpha_H0,
        "sigma_uu": suu,
        "sigma_pp": spp,
        "frame": {
            "e4_norm": float(np.max(np.abs(_dot(ref, R, e4, e4) + 1.0))),
            "e3_norm": float(np.max(np.abs(_dot(ref, R, e3, e3) - 1.0))),
            "e3_e4": float(np.max(np.abs(_dot(ref, R, e3, e4)))),
            "e4_tangent": float(np.max(np.abs(_dot(ref, R, e4, Xu)))),
            "e4_lemma": float(np.max(np.abs(e4_lemma - e4))),
            "dt_decomposition": float(np.max(np.abs(dt_decomp - dt))),
        },
    }


def _mismatch(lhs, rhs):
    lhs, rhs = np.asarray(lhs, dtype=float), np.asarray(rhs, dtype=float)
    absolute = float(np.max(np.abs(lhs - rhs)))
    scale = float(max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), 1e-300))
    return {"absolute": absolute, "relative": absolute / scale}


def identity_suite(emb):
    """Evaluate both sides of the slice/spacetime identities on ``emb``."""
    proj = project_surface(emb)
    gd = gauge_quantities(emb, proj)
    st = spacetime_frame(emb, proj)
    V = gd.V

    projection_rhs = -st["H0_dot_e3"] - V / gd.W * st["alpha_e3"] * gd.grad_tau_u
    lhs_int = sk.integrate(proj.metric, V * proj.mean_curvature)
    integrand = (
        np.sqrt((gd.A * gd.normH0) ** 2 + gd.B**2)
        + gd.B * gd.theta
        - gd.alpha_H0 * V**2 * gd.grad_tau_u
    )
    rhs_int = sk.integrate(gd.sigma, integrand)
    return {
        "projection_relation": _mismatch(proj.mean_curvature, projection_rhs),
        "mean_curvature_gauge_integral": {
            "lhs": lhs_int,
            "rhs": rhs_int,
            **_mismatch([lhs_int], [rhs_int]),
        },
        "frame": st["frame"],
        "connection_e3": _mismatch(gd.alpha_e3, st["alpha_e3"]),
        "connection_H0": _mismatch(gd.alpha_H0, st["alpha_H0"]),
        "normH0": _mismatch(gd.normH0, st["normH0"]),
        "H0_dot_e4": _mismatch(-gd.B / gd.A, st["H0_dot_e4"]),
        "gauge_hyperbolic": float(
            np.max(np.abs((gd.P / gd.normH0) ** 2 - (gd.B / (gd.normH0 * gd.A)) ** 2 - 1.0))
        ),
    }
