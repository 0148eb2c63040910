import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from qle import surface as sk
from qle.embedding import (
    SpacetimeEmbedding,
    embedding_residual,
    gauge_quantities,
    identity_suite,
    induced_metric,
    isometric_embed_axisym,
    project_surface,
    slice_variation,
)
from qle.errors import ConvergenceError, DomainError, GeometryError
from qle.reference import build_reference
from qle.variation import axial_gauge

SCH = build_reference("schwarzschild", mass=1.0)
MINK = build_reference("minkowski")


def _minkowski_normH_oracle(radius, a):
    """|H| of (t = a P2(cos u), r = radius) in flat spacetime, by symbolic Laplace-Beltrami."""
    u, phi = sp.symbols("u phi")
    t = a * (3 * sp.cos(u) ** 2 - 1) / 2
    X = [t, radius * sp.sin(u) * sp.cos(phi), radius * sp.sin(u) * sp.sin(phi), radius * sp.cos(u)]
    suu = radius**2 - sp.diff(t, u) ** 2
    spp = radius**2 * sp.sin(u) ** 2
    root = sp.sqrt(suu * spp)
    H = [sp.diff(root / suu * sp.diff(Xa, u), u) / root + sp.diff(Xa, phi, 2) / spp for Xa in X]
    norm2 = (-H[0] ** 2 + H[1] ** 2 + H[2] ** 2 + H[3] ** 2).subs(phi, 0)
    return sp.lambdify(u, sp.sqrt(norm2), "numpy")


def test_normH_against_symbolic_minkowski_oracle():
    g = sk.make_grid(40)
    oracle = _minkowski_normH_oracle(sp.Integer(3), sp.Rational(1, 5))
    emb = SpacetimeEmbedding.coordinate_sphere(MINK, g, 3.0, 0.2 * sk.legendre_field(g, [0, 0, 1]))
    assert np.max(np.abs(gauge_quantities(emb).normH0 - oracle(g.u))) < 1e-11


def test_coordinate_sphere_mean_curvature():
    g = sk.make_grid(32)
    for R in (2.5, 4.0, 9.0):
        proj = project_surface(SpacetimeEmbedding.coordinate_sphere(SCH, g, R))
        assert np.allclose(proj.mean_curvature, 2 * np.sqrt(1 - 2 / R) / R, rtol=1e-13)
        assert np.allclose(proj.nu_V, 1.0 / R**2, rtol=1e-13)


@pytest.mark.parametrize("ref", [MINK, SCH], ids=["minkowski", "schwarzschild"])
def test_round_target_recovers_coordinate_sphere(ref):
    g = sk.make_grid(32)
    emb = isometric_embed_axisym(sk.SurfaceMetric.round(g, 4.0), ref)
    assert np.max(np.abs(emb.R - 4.0)) < 1e-12
    assert np.max(np.abs(emb.q)) < 1e-12


def test_ellipsoid_target_in_flat_space():
    g = sk.make_grid(48)
    a, c = 2.0, 3.0
    x, omx = g.x, g.one_minus_x2
    target = sk.SurfaceMetric(g, a**2 * x**2 + c**2 * omx, a**2 * omx)
    emb = isometric_embed_axisym(target, MINK)
    R = np.sqrt(a**2 * omx + c**2 * x**2)
    assert np.max(np.abs(emb.R - R)) < 1e-10
    assert np.max(np.abs(emb.cos_theta - c * x / R)) < 1e-10
    again = isometric_embed_axisym(target, MINK, guess=emb, gauge_shift=axial_gauge(emb))
    assert again.solve_info["iterations"] <= 1


def test_conformal_target_with_time_function_is_isometric():
    g = sk.make_grid(48)
    target = sk.SurfaceMetric.conformal(g, 16.0 * (1 + 0.05 * sk.legendre_field(g, [0, 0, 1])))
    tau = 0.2 * sk.legendre_field(g, [0, 0.5, 0.3])
    emb = isometric_embed_axisym(target, SCH, tau)
    ind = induced_metric(emb)
    assert np.max(np.abs(ind.suu - target.suu)) < 1e-9
    assert np.max(np.abs(ind.spp - target.spp)) < 1e-9
    assert embedding_residual(emb, target) < 1e-9


def test_target_too_small_for_schwarzschild():
    g = sk.make_grid(16)
    with pytest.raises((DomainError, ConvergenceError)):
        isometric_embed_axisym(sk.SurfaceMetric.round(g, 1.0), SCH)


def test_timelike_mean_curvature_detected():
    g = sk.make_grid(24)
    emb = SpacetimeEmbedding.coordinate_sphere(MINK, g, 1.0, 0.5 * sk.legendre_field(g, [0, 0, 1]))
    with pytest.raises(GeometryError, match="mean curvature not spacelike"):
        gauge_quantities(emb)
    steep = emb.with_tau(0.6 * sk.legendre_field(g, [0, 0, 0, 1]))
    with pytest.raises(GeometryError, match="not spacelike"):
        gauge_quantities(steep)


def test_boosted_plane_section_has_spacelike_mean_curvature():
    g = sk.make_grid(24)
    emb = SpacetimeEmbedding.coordinate_sphere(MINK, g, 1.0, 0.9 * sk.legendre_field(g, [0, 1]))
    assert np.all(gauge_quantities(emb).normH0 > 0)


def test_slice_variation_zero_for_constant_shift():
    g = sk.make_grid(24)
    emb = SpacetimeEmbedding.coordinate_sphere(SCH, g, 4.0)
    dR, dq = slice_variation(emb, np.ones(g.n))
    assert np.max(np.abs(dR)) < 1e-13 and np.max(np.abs(dq)) < 1e-13


@settings(max_examples=15, deadline=None)
@given(
    st.lists(st.floats(-0.15, 0.15), min_size=1, max_size=4),
    st.floats(3.0, 8.0),
    st.sampled_from(["minkowski", "schwarzschild", "de_sitter"]),
)
def test_identity_suite_holds(tau_coeffs, radius, kind):
    ref = {
        "minkowski": MINK,
        "schwarzschild": SCH,
        "de_sitter": build_reference("schwarzschild_lambda", mass=1.0, cosmological_constant=0.01),
    }[kind]
    g = sk.make_grid(40)
    tau = sk.legendre_field(g, [0.0, *tau_coeffs])
    q = 0.03 * sk.legendre_field(g, [0, 1])
    R = radius * (1 + 0.05 * sk.legendre_field(g, [0, 0, 1]))
    emb = SpacetimeEmbedding(ref, g, R, q, tau)
    rep = identity_suite(emb)
    assert rep["projection_relation"]["relative"] < 1e-11
    assert rep["mean_curvature_gauge_integral"]["absolute"] < 1e-9
    assert max(rep["frame"].values()) < 1e-12
    for key in ("connection_e3", "connection_H0", "normH0", "H0_dot_e4"):
        assert rep[key]["absolute"] < 1e-8, key
    assert rep["gauge_hyperbolic"] < 1e-10
