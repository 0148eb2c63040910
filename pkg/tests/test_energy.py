import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qle import surface as sk
from qle.embedding import SpacetimeEmbedding, isometric_embed_axisym
from qle.energy import (
    PhysicalSurfaceData,
    energy_density,
    load_physical_data,
    physical_data_from_static,
    quasilocal_energy,
    write_physical_data,
)
from qle.errors import PreconditionError, ValidationError
from qle.reference import build_reference

SCH = build_reference("schwarzschild", mass=1.0)
MINK = build_reference("minkowski")
GRID = sk.make_grid(48)

# R (1 - sqrt(1 - 2/R)) from 30-digit arithmetic, frozen
FROZEN_SPHERE_ENERGY = {
    3.0: 1.2679491924311227,
    4.0: 1.1715728752538099,
    10.0: 1.0557280900008412,
}


def _sphere_data(world, R):
    return physical_data_from_static(world, SpacetimeEmbedding.coordinate_sphere(world, GRID, R))


@pytest.mark.parametrize("R", sorted(FROZEN_SPHERE_ENERGY))
def test_schwarzschild_sphere_over_minkowski(R):
    data = _sphere_data(SCH, R)
    emb = isometric_embed_axisym(data.sigma, MINK)
    br = quasilocal_energy(data, emb)
    assert br.energy == pytest.approx(FROZEN_SPHERE_ENERGY[R], abs=1e-12)
    assert br.path_mismatch < 1e-12
    rho = energy_density(data, emb)
    assert np.allclose(rho, 2 / R * (1 - np.sqrt(1 - 2 / R)), rtol=1e-12)


def test_heavier_sphere_over_schwarzschild():
    R, m2 = 5.0, 1.05
    world = build_reference("schwarzschild", mass=m2)
    data = _sphere_data(world, R)
    emb = isometric_embed_axisym(data.sigma, SCH)
    F1, F2 = 1 - 2 / R, 1 - 2 * m2 / R
    assert quasilocal_energy(data, emb).energy == pytest.approx(R * (F1 - np.sqrt(F1 * F2)), rel=1e-12)


def test_own_data_has_zero_energy():
    q = 0.04 * sk.legendre_field(GRID, [0, 1])
    emb = SpacetimeEmbedding(SCH, GRID, 4.5 + 0.3 * sk.legendre_field(GRID, [0, 0, 1]), q, np.zeros(GRID.n))
    data = physical_data_from_static(SCH, emb)
    assert abs(quasilocal_energy(data, emb).energy) < 1e-13


def test_non_isometric_pair_rejected():
    data = _sphere_data(SCH, 4.0)
    with pytest.raises(PreconditionError, match="not isometric"):
        quasilocal_energy(data, SpacetimeEmbedding.coordinate_sphere(MINK, GRID, 4.1))


def test_physical_data_validation():
    sigma = sk.SurfaceMetric.round(GRID, 2.0)
    with pytest.raises(ValidationError, match="not spacelike"):
        PhysicalSurfaceData(sigma, np.zeros(GRID.n), np.zeros(GRID.n))
    with pytest.raises(ValidationError, match="grid"):
        PhysicalSurfaceData(sigma, np.ones(3), np.zeros(3))


def test_csv_round_trip(tmp_path):
    tau = 0.1 * sk.legendre_field(GRID, [0, 1, 0.5])
    data = physical_data_from_static(SCH, SpacetimeEmbedding.coordinate_sphere(SCH, GRID, 4.0, tau))
    path = tmp_path / "data.csv"
    write_physical_data(path, data)
    back = load_physical_data(path)
    assert np.array_equal(back.sigma.suu, data.sigma.suu)
    assert np.array_equal(back.normH, data.normH)
    assert np.array_equal(back.alpha_H, data.alpha_H)


def test_csv_wrong_nodes(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("u,a,b,c,d\n" + "\n".join(f"{u},1,1,1,0" for u in np.linspace(0.1, 3.0, 10)))
    with pytest.raises(ValidationError, match="Gauss-Legendre"):
        load_physical_data(path)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-0.2, 0.2), min_size=1, max_size=3), st.floats(3.5, 7.0))
def test_energy_even_under_time_reversal(coeffs, R):
    data = _sphere_data(SCH, R)
    tau = sk.legendre_field(GRID, [0.0, *coeffs])
    plus = quasilocal_energy(data, isometric_embed_axisym(data.sigma, MINK, tau))
    minus = quasilocal_energy(data, isometric_embed_axisym(data.sigma, MINK, -tau))
    assert plus.energy == pytest.approx(minus.energy, abs=1e-10)
    assert plus.path_mismatch < 1e-10 and minus.path_mismatch < 1e-10


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-0.2, 0.2), min_size=1, max_size=3))
def test_base_and_graph_forms_agree(coeffs):
    world = build_reference("schwarzschild", mass=1.1)
    tau_w = sk.legendre_field(GRID, [0.0, 0.1, -0.05])
    data = physical_data_from_static(world, SpacetimeEmbedding.coordinate_sphere(world, GRID, 5.0, tau_w))
    emb = isometric_embed_axisym(data.sigma, SCH, sk.legendre_field(GRID, [0.0, *coeffs]))
    assert quasilocal_energy(data, emb).path_mismatch < 1e-10
