import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carpetlab.errors import ConvergenceError
from carpetlab.geometry import WeightConfig
from carpetlab.walks import (
    PATTERNS,
    SquareConfig,
    TransitionSampler,
    corner_domain,
    corner_move_check,
    exit_time,
    folding_check,
    hitting_distribution,
    knight_domain,
    knight_move_check,
    make_rng,
    mean_exit_time,
    reflected_quadrant_check,
    simulate_y_chain,
    start_nodes,
    y_chain_law,
)

from oracles import dense_dirichlet


def test_rng_streams_are_reproducible_and_distinct():
    a = make_rng(5, 0).random(4)
    assert np.array_equal(a, make_rng(5, 0).random(4))
    assert not np.array_equal(a, make_rng(5, 1).random(4))


def test_square_config_validation():
    with pytest.raises(ValueError):
        SquareConfig("z")
    with pytest.raises(ValueError):
        SquareConfig("a", m=-1)
    with pytest.raises(ValueError):
        SquareConfig("a", multipliers=(1, 1, 1))
    sq = SquareConfig("b", WeightConfig(2), 1)
    assert sq.mu(3) == 0 and sq.mu(1) == pytest.approx(12.0) and sq.mu(2) == pytest.approx(24.0)


@pytest.mark.parametrize("pattern", sorted(PATTERNS))
def test_segment_weights_are_a_partition(pattern):
    g, part = knight_domain(SquareConfig(pattern, WeightConfig(1), 1), 3)
    np.testing.assert_allclose(part.weights.sum(axis=1), 1.0, atol=1e-12)
    assert len(part.labels) == 16
    # every node on the outer square is absorbing
    s = 3 * g.scale
    on = (np.abs(g.keys[:, 0]) == s) | (np.abs(g.keys[:, 1]) == s)
    assert set(np.nonzero(on)[0]) == set(part.nodes.tolist())


def test_sampler_matches_transition_probabilities():
    g, _ = corner_domain(SquareConfig("c", WeightConfig(2), 1), 1)
    smp = TransitionSampler(g)
    A = g.adjacency.tocsr()
    v = int(np.argmax(np.diff(A.indptr)))
    u = make_rng(0).random(200_000)
    nxt = smp.step(np.full(u.size, v), u)
    row = A.getrow(v)
    freq = np.array([(nxt == j).mean() for j in row.indices])
    p = row.data / row.data.sum()
    np.testing.assert_allclose(freq, p, atol=5 * np.sqrt(p * (1 - p) / u.size).max())


def test_exact_law_matches_dense_oracle():
    sq = SquareConfig("c", WeightConfig(2), 1)
    g, part = corner_domain(sq, 3)
    x = start_nodes(g, [0.7])[0]
    ex = hitting_distribution(g, x, part)
    ref = dense_dirichlet(g.laplacian, part.nodes, part.weights)[x]
    np.testing.assert_allclose(ex.mass, ref, atol=1e-10)
    assert ex.mass.sum() == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("rho", ["1/2", "2"])
def test_simulated_law_agrees_with_exact(rho):
    from carpetlab.geometry import parse_rho

    sq = SquareConfig("c", WeightConfig(parse_rho(rho)), 1)
    g, part = corner_domain(sq, 1)
    x = start_nodes(g, [1.0])[0]
    ex = hitting_distribution(g, x, part)
    mc = hitting_distribution(g, x, part, "mc", samples=20000, seed=3)
    se = np.maximum(mc.stderr, 1e-3)
    assert np.all(np.abs(mc.mass - ex.mass) <= 4 * se)
    with pytest.raises(ValueError):
        hitting_distribution(g, x, part, "mc")
    with pytest.raises(ValueError):
        hitting_distribution(g, x, part, "nope")


@pytest.mark.parametrize("pattern", ["a", "c", "g"])
def test_corner_bound(pattern, cfg):
    rep = corner_move_check(SquareConfig(pattern, cfg, 1), k=9, slack=0.0)
    assert rep.holds, rep.points
    if 4 not in PATTERNS[pattern]:
        assert rep.bound == pytest.approx(1 / 6)


def test_reflected_quadrant_bound(cfg):
    rep = reflected_quadrant_check(SquareConfig("a", cfg, 1), k=9, slack=0.0)
    assert rep.holds
    for _, probs in rep.points:
        assert sum(probs) == pytest.approx(1.0, abs=1e-10)


def test_reflected_corner_split_is_symmetric(cfg):
    # from the corner the diagonal reflection swaps the right and top sides
    rep = reflected_quadrant_check(SquareConfig("a", cfg, 1), xs=[0.0], k=9)
    p = rep.points[0][1]
    assert p[0] == pytest.approx(p[3], abs=1e-10)
    assert p[1] == pytest.approx(p[2], abs=1e-10)


@pytest.mark.parametrize("segments", [("L6",), ("L1", "L2"), ("L3", "L4", "L5")])
def test_folding_identity(segments, cfg):
    sq = SquareConfig("c", cfg, 1)
    r = folding_check(sq, 1.0, segments, k=9)
    assert r.residual < 1e-10
    with pytest.raises(ValueError):
        folding_check(SquareConfig("a", cfg, 1), 1.0)
    with pytest.raises(ValueError):
        folding_check(sq, 1.0, ("L9",))


def test_y_chain_law_rows(cfg):
    for p in PATTERNS:
        P = y_chain_law(SquareConfig(p, cfg, 1))
        s = P.sum(axis=1)
        assert np.all((np.abs(s - 1) < 1e-14) | (s == 0))
    P = y_chain_law(SquareConfig("g", WeightConfig(1), 1))
    np.testing.assert_allclose(P, np.array([[0, .5, 0, .5], [.5, 0, .5, 0], [0, .5, 0, .5], [.5, 0, .5, 0]]))


def test_y_chain_simulation(cfg):
    est = simulate_y_chain(SquareConfig("e", cfg, 1), k=1, transitions=20000, seed=1, walkers=500)
    assert est.max_z() < 4.5
    assert est.counts.sum() >= 20000


def test_knight_probability_positive():
    rep = knight_move_check(SquareConfig("g", WeightConfig(1), 1), k=3)
    assert 0 < rep.worst < 1


def test_exit_time_exact_against_simulation():
    cfg = WeightConfig(1)
    ex = exit_time((1.5, 1.5), 1.5, cfg, k=1)
    mc = exit_time((1.5, 1.5), 1.5, cfg, k=1, mode="mc", samples=20000, seed=2)
    assert abs(mc.mean - ex.mean) <= 4 * mc.stderr
    with pytest.raises(ConvergenceError):
        exit_time((1.5, 1.5), 1.5, cfg, k=1, mode="mc", samples=2, seed=0)


@settings(max_examples=10)
@given(st.floats(1.0, 3.0))
def test_exit_time_grows_with_radius(r):
    cfg = WeightConfig(1)
    a = exit_time((4.5, 0.5), r, cfg, k=3).mean
    b = exit_time((4.5, 0.5), r + 0.5, cfg, k=3).mean
    assert b >= a


def test_exit_time_exponent_is_above_two():
    tab = mean_exit_time((0.0, 0.0), [3, 9], WeightConfig(1), k=1)
    assert tab.exponent > 2.0
    with pytest.raises(ValueError):
        mean_exit_time((0, 0), [1], WeightConfig(1))
