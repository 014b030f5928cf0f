from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from carpetlab.geometry import WeightConfig
from carpetlab.network import build_cross_graph, build_diag_graph, build_grid_graph
from carpetlab.resistance import (
    BoundarySpec,
    annulus_resistance,
    effective_resistance,
    interface_fluxes,
    res,
    side_boundary,
    unit_flow,
)

from oracles import contracted_resistance


@pytest.mark.parametrize("k", [1, 2, 3, 9])
@pytest.mark.parametrize("w", [0.5, 1.0, 4.0])
def test_single_square_is_reciprocal_weight(k, w):
    g = build_grid_graph((np.array([0]), np.array([0]), np.array([w])), None, k)
    sol = effective_resistance(g, side_boundary(g))
    assert sol.resistance == pytest.approx(1.0 / w, rel=1e-9)


def test_two_squares_in_series():
    g = build_grid_graph((np.array([0, 1]), np.array([0, 0]), np.array([1.0, 2.0])), None, 3)
    sol = effective_resistance(g, side_boundary(g))
    assert sol.resistance == pytest.approx(1.5, rel=1e-9)


def test_two_squares_in_parallel():
    g = build_grid_graph((np.array([0, 0]), np.array([0, 1]), np.array([1.0, 3.0])), None, 3)
    sol = effective_resistance(g, side_boundary(g))
    assert sol.resistance == pytest.approx(0.25, rel=1e-9)


@pytest.mark.parametrize("kind", ["G", "D", "grid"])
def test_matches_pseudoinverse_oracle(kind, cfg):
    if kind == "G":
        g = build_cross_graph(1, cfg)
    elif kind == "D":
        g = build_diag_graph(1, cfg)
    else:
        g = build_grid_graph(1, cfg, 3)
    b = side_boundary(g)
    sol = effective_resistance(g, b)
    assert sol.resistance == pytest.approx(contracted_resistance(g, b.source, b.sink), rel=1e-9)


def test_cross_graph_level_one_unit_weight():
    # hand reduction of the eight-cell ring: 14/5
    g = build_cross_graph(1, WeightConfig(1))
    assert effective_resistance(g, side_boundary(g)).resistance == pytest.approx(2.8, rel=1e-10)


@pytest.mark.parametrize("kind", ["G", "D", "grid"])
def test_potential_and_flow_principles_agree(kind, cfg):
    g = {"G": build_cross_graph(2, cfg), "D": build_diag_graph(2, cfg), "grid": build_grid_graph(2, cfg, 3)}[kind]
    b = side_boundary(g)
    sol = effective_resistance(g, b, tol=1e-10)
    assert sol.duality_gap <= 4e-10 * sol.resistance
    J = unit_flow(g, sol)
    assert J.flux(b.source) == pytest.approx(1.0, abs=1e-14)
    assert J.flux(b.sink) == pytest.approx(-1.0, abs=1e-9)
    assert J.max_interior_divergence(np.concatenate([b.source, b.sink])) < 1e-9


@given(st.integers(0, 10**6))
def test_optimal_flow_minimises_energy(seed):
    g = build_grid_graph(1, WeightConfig(2), 1)
    b = side_boundary(g)
    sol = effective_resistance(g, b, tol=1e-13)
    J = unit_flow(g, sol)
    # add a random cycle: the divergence-free part of a random edge vector
    n, e = g.n_nodes, g.edges
    B = np.zeros((n, g.n_edges))
    B[e[:, 0], np.arange(g.n_edges)] = 1
    B[e[:, 1], np.arange(g.n_edges)] = -1
    z = np.random.default_rng(seed).normal(size=g.n_edges)
    cyc = z - B.T @ np.linalg.lstsq(B @ B.T, B @ z, rcond=None)[0]
    assert np.abs(B @ cyc).max() < 1e-9
    other = J.current + 0.1 * cyc
    assert np.sum(other**2 / g.conductance) >= J.energy() - 1e-12


@given(st.integers(0, 10**6))
def test_harmonic_potential_minimises_energy(seed):
    g = build_grid_graph(1, WeightConfig(Fraction(1, 2)), 2)
    b = side_boundary(g)
    sol = effective_resistance(g, b, tol=1e-13)
    bump = np.random.default_rng(seed).normal(size=g.n_nodes)
    bump[b.source] = 0
    bump[b.sink] = 0
    assert g.energy(sol.potential + 0.05 * bump) >= sol.energy - 1e-12


@given(st.lists(st.floats(1.0, 5.0), min_size=8, max_size=8))
def test_raising_conductances_lowers_resistance(factors):
    cfg = WeightConfig(1)
    g = build_cross_graph(1, cfg)
    b = side_boundary(g)
    base = effective_resistance(g, b).resistance
    bumped = np.repeat(np.asarray(factors), 4) * g.conductance
    g2 = type(g)(g.keys, g.scale, g.roles, g.edges, bumped, g.mass, g.level, g.region, g.meta)
    assert effective_resistance(g2, b).resistance <= base * (1 + 1e-9)


def test_boundary_spec_validation():
    with pytest.raises(ValueError):
        BoundarySpec(np.array([], dtype=int), np.array([1]))
    with pytest.raises(ValueError):
        BoundarySpec(np.array([1, 2]), np.array([2, 3]))


def test_res_matches_oracle():
    g = build_grid_graph((0, 0, 3, 3), WeightConfig(1), 3)
    c = g.coords
    d = np.maximum(np.abs(c[:, 0] - 1.5), np.abs(c[:, 1] - 1.5))
    A = np.nonzero(d <= 0.5)[0]
    omega = np.nonzero(d < 1.5)[0]
    outside = np.setdiff1d(np.arange(g.n_nodes), omega)
    assert res(A, omega, g) == pytest.approx(contracted_resistance(g, outside, A), rel=1e-8)
    with pytest.raises(ValueError):
        res(np.array([outside[0]]), omega, g)


def test_interface_flux_is_continuous(cfg):
    g = build_grid_graph(1, cfg, 3)
    sol = effective_resistance(g, side_boundary(g), tol=1e-13)
    rows = interface_fluxes(g, sol.potential)
    assert rows.shape[0] > 0
    np.testing.assert_allclose(rows[:, 0], -rows[:, 1], atol=1e-9)


def test_annulus_report(cfg1):
    rep = annulus_resistance((0, 0), 0, 2, cfg1, mesh=3, R_n=1.0)
    assert rep.resistance > 0
    assert rep.ratio == pytest.approx(rep.resistance / rep.comparison)
