import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from carpetlab.geometry import WeightConfig
from carpetlab.scaling import (
    beta_from_lambda,
    block_resistance,
    estimate_lambda,
    psi,
    richardson,
    scaling_report,
    verify_inequalities,
)


@given(st.floats(0.5, 5), st.floats(-3, 3))
def test_richardson_removes_quadratic_error(R, a):
    vals = {9: R + a / 81, 27: R + a / 729}
    assert richardson(vals) == pytest.approx(R, abs=1e-12)
    assert richardson({3: R}) == R


@given(st.floats(0.6, 1.6), st.floats(0.5, 2.0))
def test_geometric_sequence_recovers_rate(lam, c0):
    est = estimate_lambda({n: c0 * lam**n for n in range(1, 6)})
    assert est.fit == pytest.approx(lam, rel=1e-10)
    assert est.fekete_lo <= lam * (1 + 1e-12)
    assert est.fekete_hi >= lam * (1 - 1e-12)


def test_estimate_lambda_needs_three_levels():
    with pytest.raises(ValueError):
        estimate_lambda({1: 1.0, 2: 2.0})
    with pytest.raises(ValueError):
        estimate_lambda({1: 1.0, 2: 2.0, 4: 3.0})


def test_beta_and_psi():
    cfg = WeightConfig(1)
    assert beta_from_lambda(cfg, 1.0) == pytest.approx(cfg.alpha)
    assert beta_from_lambda(cfg, 3.0) == pytest.approx(cfg.alpha + 1)
    assert psi(2.0, 2.5) == pytest.approx(2**2.5)
    assert psi(0.5, 2.5) == pytest.approx(0.25)
    assert psi(1.0, 2.5) == 1.0
    with pytest.raises(ValueError):
        psi(0.0, 2.0)


def test_level_zero_is_unit_square():
    assert block_resistance(0, WeightConfig(3)).R == 1.0
    with pytest.raises(ValueError):
        block_resistance(-1, WeightConfig(1))
    with pytest.raises(ValueError):
        block_resistance(1, WeightConfig(1), method="X")


def test_grid_extrapolation_sits_between_graph_bounds(cfg):
    R = block_resistance(1, cfg, meshes=(9, 27)).R
    D = block_resistance(1, cfg, "D").R
    G = block_resistance(1, cfg, "G").R
    # R_1 <= R_0 R_1^G with R_0 = 1, and R_1^D / 2 <= R_1
    assert 0.5 * D <= R <= G


@pytest.mark.parametrize("rho", [Fraction(1, 2), Fraction(1), Fraction(2)])
def test_inequalities_hold_at_small_levels(rho):
    recs = verify_inequalities(WeightConfig(rho), [(1, 1)], meshes=(3, 9))
    assert len(recs) == 4
    assert all(r.holds for r in recs), recs


def test_report_shape():
    rep = scaling_report(WeightConfig(1), n_max=3, meshes=(3, 9))
    assert len(rep.rows) == 9
    assert rep.lambda_fekete_lo <= rep.lambda_fekete_hi
    assert rep.beta == pytest.approx(WeightConfig(1).alpha + math.log(rep.lambda_fit) / math.log(3))
    assert rep.violations == []
    d = rep.to_dict()
    assert set(d["lambdas_by_method"]) == {"grid", "G", "D"}
    with pytest.raises(ValueError):
        scaling_report(WeightConfig(1), n_max=2)
