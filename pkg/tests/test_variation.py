import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qle import surface as sk
from qle.embedding import SpacetimeEmbedding, isometric_embed_axisym
from qle.energy import physical_data_from_static, quasilocal_energy
from qle.errors import PreconditionError
from qle.reference import build_reference
from qle.variation import (
    directional_derivative,
    fd_directional_derivative,
    first_variation_density,
    isometric_family,
    optimize_tau,
    second_variation,
    second_variation_form,
    variation_identity_suite,
)

SCH = build_reference("schwarzschild", mass=1.0)
MINK = build_reference("minkowski")
GRID = sk.make_grid(48)


def P(ell, grid=GRID):
    return sk.legendre_field(grid, np.eye(ell + 1)[ell])


def sphere_second_variation(mass, R, ell, dshift=0.0):
    """Closed form on a coordinate sphere for tau = s P_l, derived by hand.

    The l = 1 non-rigid displacement switched on by the axial gauge adds
    dshift^2 m^2 / (F R^3).
    """
    F = 1 - 2 * mass / R
    dF = 2 * mass / R**2
    lam = ell * (ell + 1)
    quad = (F * lam**2 / (2 * R) - F**2 * lam / R + F * dF * lam / 2) / (2 * (2 * ell + 1))
    return quad + dshift**2 * mass**2 / (F * R**3)


@pytest.mark.parametrize("ell", range(1, 7))
def test_second_variation_closed_form_and_fd(ell):
    emb = SpacetimeEmbedding.coordinate_sphere(SCH, GRID, 4.0)
    rep = second_variation(emb, P(ell))
    assert rep.value == pytest.approx(sphere_second_variation(1.0, 4.0, ell), rel=1e-10)
    assert rep.fd_relative < 1e-2 and rep.fd_ok
    assert rep.sphere_of_symmetry


def test_second_variation_sphere_term():
    emb = SpacetimeEmbedding.coordinate_sphere(SCH, GRID, 4.0)
    rep = second_variation(emb, P(2), dshift=0.5)
    assert rep.sphere_term == pytest.approx(0.0078125, rel=1e-9)
    assert rep.value == pytest.approx(sphere_second_variation(1.0, 4.0, 2, 0.5), rel=1e-10)
    assert rep.fd_relative < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 2.0), st.floats(1.6, 6.0), st.integers(1, 8))
def test_second_variation_form_property(mass, factor, ell):
    ref = build_reference("schwarzschild", mass=mass)
    R = 2 * mass * factor
    emb = SpacetimeEmbedding.coordinate_sphere(ref, GRID, R)
    value = second_variation_form(emb, P(ell)) / (8 * np.pi)
    assert value == pytest.approx(sphere_second_variation(mass, R, ell), rel=1e-9, abs=1e-13)
    assert value >= -1e-12


def test_second_variation_needs_slice_surface():
    emb = SpacetimeEmbedding.coordinate_sphere(SCH, GRID, 4.0, 0.1 * P(1))
    with pytest.raises(PreconditionError):
        second_variation(emb, P(2))


def test_own_embedding_is_critical():
    q = 0.04 * P(1)
    surf = SpacetimeEmbedding(SCH, GRID, 4.5 + 0.2 * P(1) + 0.35 * P(2), q, np.zeros(GRID.n))
    data = physical_data_from_static(SCH, surf)
    rep = first_variation_density(data, surf)
    assert np.max(np.abs(rep.E_V)) + np.max(np.abs(rep.E_tau)) < 1e-10


def test_first_variation_matches_finite_differences():
    world = build_reference("schwarzschild", mass=1.05)
    data = physical_data_from_static(world, SpacetimeEmbedding.coordinate_sphere(world, GRID, 4.0))
    base = isometric_embed_axisym(data.sigma, SCH, 0.1 * P(1) + 0.05 * P(2), tol=1e-12)
    dtau = P(1) - 0.5 * P(3)
    formula = directional_derivative(data, base, dtau).dE_ds
    fd = fd_directional_derivative(data, base, dtau, 1e-2)
    assert fd == pytest.approx(formula, rel=1e-7)


def test_constant_direction_changes_nothing():
    data = physical_data_from_static(SCH, SpacetimeEmbedding.coordinate_sphere(SCH, GRID, 4.0))
    base = isometric_embed_axisym(data.sigma, MINK, 0.1 * P(2))
    assert abs(directional_derivative(data, base, np.ones(GRID.n)).dE_ds) < 1e-13


def test_family_truncates_on_failure(monkeypatch):
    import qle.variation as var
    from qle.errors import ConvergenceError

    data = physical_data_from_static(SCH, SpacetimeEmbedding.coordinate_sphere(SCH, GRID, 4.0))
    base = isometric_embed_axisym(data.sigma, MINK)
    real = var.isometric_embed_axisym

    def flaky(target, ref, tau, **kw):
        if np.max(np.abs(tau)) > 10:
            raise ConvergenceError("isometric embedding did not converge", residual=1.0)
        return real(target, ref, tau, **kw)

    monkeypatch.setattr(var, "isometric_embed_axisym", flaky)
    fam = isometric_family(data, base, P(2), [0.1, 50.0, 0.2])
    assert not fam.complete
    assert fam.failure["s"] == 50.0
    assert fam.failure["reason"] == "isometric embedding did not converge"
    assert len(fam.members) == 1
    assert fam.max_isometry_error < 1e-9


def test_optimize_returns_to_own_embedding():
    surf = SpacetimeEmbedding.coordinate_sphere(SCH, GRID, 4.0)
    data = physical_data_from_static(SCH, surf)
    res = optimize_tau(data, SCH, 0.02 * P(2) + 0.01 * P(3), lmax=6, tol=1e-7)
    assert res.converged
    assert abs(res.energy) < 1e-10
    assert np.max(np.abs(res.coefficients)) < 1e-6
    energies = [h["energy"] for h in res.history]
    assert all(b <= a + 1e-14 for a, b in zip(energies, energies[1:]))


@settings(max_examples=10, deadline=None)
@given(
    st.lists(st.floats(-1, 1), min_size=1, max_size=5),
    st.lists(st.floats(-1, 1), min_size=1, max_size=4),
)
def test_slice_variation_identities(beta_c, p_c):
    g = sk.make_grid(40)
    surf = SpacetimeEmbedding(SCH, g, 4.5 + 0.3 * P(2, g), 0.03 * P(1, g), np.zeros(g.n))
    beta = 0.1 * sk.legendre_field(g, beta_c)
    P_u = 0.1 * g.sin_u * sk.legendre_field(g, p_c)
    rep = variation_identity_suite(surf, beta, P_u)
    assert rep["metric_variation"]["absolute"] < 1e-8
    assert rep["mean_curvature_variation"]["absolute"] < 1e-7
    assert rep["normal_identity"]["residual"] < 1e-10
    assert rep["tangential_identity"]["residual"] < 1e-10


def test_energy_vanishes_at_zero_amplitude():
    data = physical_data_from_static(SCH, SpacetimeEmbedding.coordinate_sphere(SCH, GRID, 4.0))
    emb = isometric_embed_axisym(data.sigma, SCH)
    assert abs(quasilocal_energy(data, emb).energy) < 1e-13
