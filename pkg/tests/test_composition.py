import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from carpetlab.composition import (
    compose_potential,
    crosswire_compose,
    crosswire_energy_bound,
    rotation_basis,
    side_inflows,
)
from carpetlab.geometry import WeightConfig


@pytest.fixture(scope="module", params=["1/2", "1", "2"])
def basis(request):
    from carpetlab.geometry import parse_rho

    return rotation_basis(1, WeightConfig(parse_rho(request.param)), k=3, tol=1e-12)


def _balanced(xs):
    H = np.asarray(xs[:3], dtype=float)
    return np.append(H, -H.sum())


def test_all_side_pairs_are_unit_flows(basis):
    ends = np.concatenate(list(basis.side_sets.values()))
    for i in range(1, 5):
        for j in range(1, 5):
            if i == j:
                continue
            J = basis.flow(i, j)
            inflow = side_inflows(J, basis)
            expect = np.zeros(4)
            expect[i - 1], expect[j - 1] = 1.0, -1.0
            np.testing.assert_allclose(inflow, expect, atol=1e-9)
            assert J.max_interior_divergence(ends) < 1e-9


def test_rotated_potentials_carry_the_resistance(basis):
    for i in range(1, 5):
        assert basis.graph.energy(basis.potentials[i]) == pytest.approx(1 / basis.resistance, rel=1e-9)


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_crosswire_hits_inflows_within_the_energy_bound(basis, xs):
    H = _balanced(xs)
    J = crosswire_compose(H, basis)
    np.testing.assert_allclose(side_inflows(J, basis), H, atol=1e-8 * max(1, np.abs(H).max()))
    assert J.energy() <= crosswire_energy_bound(H, basis.resistance) * (1 + 1e-9) + 1e-12


def test_crosswire_zero_and_invalid(basis):
    assert crosswire_compose(np.zeros(4), basis).energy() == 0
    with pytest.raises(ValueError):
        crosswire_compose([1, 0, 0, 0], basis)
    with pytest.raises(ValueError):
        crosswire_compose([1, -1, 0], basis)


def test_opposite_sides_reproduce_the_optimal_flow(basis):
    J = crosswire_compose([0, 0, 0, 0], basis)
    assert J.energy() == 0
    J = crosswire_compose([0, -1, 0, 1], basis)
    assert J.energy() == pytest.approx(basis.resistance, rel=1e-9)


@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_composed_potential_energy_bound(basis, z):
    z = np.asarray(z)
    out = compose_potential(z, basis)
    assert out.seam_mismatch < 1e-9 * max(1, np.abs(z).max())
    assert out.energy <= out.bound * (1 + 1e-9) + 1e-12


def test_composed_potential_reaches_corner_and_centre_values(basis):
    z = np.array([0.0, 1.0, 3.0, -2.0])
    out = compose_potential(z, basis, center=z.mean())
    c = basis.graph.coords
    s = 3.0
    for (x, y), zi in zip([(0, 0), (s, 0), (s, s), (0, s)], z):
        at = np.nonzero((c[:, 0] == x) & (c[:, 1] == y))[0]
        if at.size:
            assert out.values[at[0]] == pytest.approx(zi, abs=1e-9)
    with pytest.raises(ValueError):
        compose_potential(z, basis, center=5.0)


def test_even_mesh_rejected():
    with pytest.raises(ValueError):
        rotation_basis(1, WeightConfig(1), k=2)
