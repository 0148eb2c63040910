import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from qle.acceptance import violating_reference
from qle.errors import DomainError, ValidationError
from qle.reference import (
    build_reference,
    check_vacuum_static,
    curvature_at,
    load_radial_table,
    null_convergence_min_eig,
)


def _sympy_ricci_orthonormal(mass, lam):
    """Ricci of dR^2/F + R^2 dOmega^2 from Christoffel symbols, in an orthonormal frame."""
    R, u, p = sp.symbols("R u p", positive=True)
    F = 1 - 2 * mass / R - lam * R**2 / 3
    coords = (R, u, p)
    g = sp.diag(1 / F, R**2, R**2 * sp.sin(u) ** 2)
    gi = g.inv()
    Gam = [
        [
            [
                sum(gi[k, l] * (sp.diff(g[l, i], coords[j]) + sp.diff(g[l, j], coords[i]) - sp.diff(g[i, j], coords[l])) for l in range(3)) / 2
                for j in range(3)
            ]
            for i in range(3)
        ]
        for k in range(3)
    ]

    def ric(i, j):
        return sp.simplify(
            sum(sp.diff(Gam[k][i][j], coords[k]) for k in range(3))
            - sum(sp.diff(Gam[k][i][k], coords[j]) for k in range(3))
            + sum(Gam[k][k][l] * Gam[l][i][j] for k in range(3) for l in range(3))
            - sum(Gam[k][j][l] * Gam[l][i][k] for k in range(3) for l in range(3))
        )

    rr = sp.lambdify(R, sp.simplify(ric(0, 0) * F))
    tt = sp.lambdify(R, sp.simplify(ric(1, 1) / R**2))
    return rr, tt


@pytest.mark.parametrize("mass,lam", [(1.0, 0.0), (1.0, 0.01), (0.5, -0.1)])
def test_ricci_matches_symbolic(mass, lam):
    kind = "schwarzschild" if lam == 0 else "schwarzschild_lambda"
    ref = build_reference(kind, mass=mass, cosmological_constant=lam)
    rr, tt = _sympy_ricci_orthonormal(sp.Rational(str(mass)), sp.Rational(str(lam)))
    Rs = np.linspace(ref.r_min * 1.05, min(ref.r_max * 0.95, 20.0), 7)
    got_rr, got_tt = ref.ricci_orthonormal(Rs)
    assert np.allclose(got_rr, [float(rr(r)) for r in Rs], rtol=1e-12, atol=1e-14)
    assert np.allclose(got_tt, [float(tt(r)) for r in Rs], rtol=1e-12, atol=1e-14)


def test_schwarzschild_values():
    ref = build_reference("schwarzschild", mass=1.0)
    assert ref.horizon == 2.0
    assert float(ref.V(4.0)) == pytest.approx(np.sqrt(0.5), rel=1e-15)
    assert float(ref.dV(4.0)) == pytest.approx(1.0 / (16.0 * np.sqrt(0.5)), rel=1e-14)
    assert float(ref.normal_derivative_V(4.0)) == pytest.approx(0.0625, rel=1e-15)


def test_de_sitter_schwarzschild_horizons():
    lam = 0.01
    ref = build_reference("schwarzschild_lambda", mass=1.0, cosmological_constant=lam)
    # independent oracle: roots of R - 2m - lam R^3/3 by companion matrix
    roots = sorted(r.real for r in np.roots([-lam / 3.0, 0.0, 1.0, -2.0]) if r.real > 0)
    assert ref.horizon == pytest.approx(roots[0], rel=1e-13)
    assert ref.outer_horizon == pytest.approx(roots[1], rel=1e-13)
    assert abs(float(ref.V(ref.horizon))) < 1e-7


def test_validation_messages():
    with pytest.raises(ValidationError, match="mass must be nonnegative"):
        build_reference("schwarzschild", mass=-1.0)
    with pytest.raises(ValidationError, match="unknown reference kind"):
        build_reference("kerr")
    with pytest.raises(ValidationError, match="no region"):
        build_reference("schwarzschild_lambda", mass=1.0, cosmological_constant=1.0)
    with pytest.raises(ValidationError, match="radial table"):
        build_reference("custom")


def test_domain_checks():
    ref = build_reference("schwarzschild", mass=1.0)
    with pytest.raises(DomainError):
        ref.require_inside(np.array([1.5]))
    with pytest.raises(DomainError):
        curvature_at(ref, (4.0, 0.0))


@pytest.mark.parametrize(
    "kind,mass,lam",
    [("minkowski", 0, 0), ("schwarzschild", 1, 0), ("schwarzschild_lambda", 1, 0.01), ("schwarzschild_lambda", 1, -0.1)],
)
def test_lambda_vacuum_residuals(kind, mass, lam):
    ref = build_reference(kind, mass=mass, cosmological_constant=lam)
    rep = check_vacuum_static(ref, lam)
    assert rep["tensor_residual"] < 1e-12
    assert rep["scalar_residual"] < 1e-12
    assert rep["scalar_curvature_mean"] == pytest.approx(2 * lam, abs=1e-12)
    assert null_convergence_min_eig(ref) > -1e-12


def test_schwarzschild_surface_gravity():
    rep = check_vacuum_static(build_reference("schwarzschild", mass=2.0))
    assert rep["horizon_gradient"]["inner"]["value"] == pytest.approx(1.0 / 8.0, rel=1e-14)


def test_violating_model_detected():
    assert null_convergence_min_eig(violating_reference()) < -1e-3


def test_custom_table_reproduces_schwarzschild(tmp_path):
    R = np.linspace(3.0, 12.0, 400)
    V = np.sqrt(1 - 2 / R)
    path = tmp_path / "table.csv"
    path.write_text("R,V,f\n" + "\n".join(f"{r:.17g},{v:.17g},{v:.17g}" for r, v in zip(R, V)))
    ref = build_reference("custom", table=load_radial_table(path))
    exact = build_reference("schwarzschild", mass=1.0)
    Rs = np.linspace(4.0, 10.0, 9)
    assert np.allclose(ref.V(Rs), exact.V(Rs), rtol=1e-8)
    assert np.allclose(ref.ricci_orthonormal(Rs)[1], exact.ricci_orthonormal(Rs)[1], atol=1e-5)
    with pytest.raises(DomainError):
        ref.V(20.0)


def test_custom_table_horizon_from_sign_change():
    R = np.linspace(1.5, 8.0, 300)
    ref = build_reference("custom", table={"R": R, "V": np.sign(R - 2) * np.sqrt(np.abs(1 - 2 / R))})
    assert ref.horizon == pytest.approx(2.0, abs=1e-3)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(1.05, 6.0), st.floats(0.2, 2.9))
def test_hessian_trace_equals_laplacian(mass, factor, u):
    ref = build_reference("schwarzschild", mass=mass)
    cb = curvature_at(ref, (2 * mass * factor, u))
    assert cb.trace_consistency() < 1e-10 * (1 + abs(cb.laplacian_V))
