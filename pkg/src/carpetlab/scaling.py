"""The resistance sequence ``R_n`` and the exponents derived from it.

``R_n`` is the left-to-right resistance of the block ``F_0^n`` for the
weighted Dirichlet form; it is approximated on grids with ``k`` sub-cells per
unit cell and extrapolated in ``1/k^2``.  ``R_n^G`` and ``R_n^D`` are the
resistances of the cross and diagonal graphs between the same two sides.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .geometry import WeightConfig
from .network import build_cross_graph, build_diag_graph, build_grid_graph
from .resistance import effective_resistance, side_boundary
from .solvers import DEFAULT_TOL

DEFAULT_MESHES = (9, 27)
SLACK_FACTOR = 4.0


@dataclass(frozen=True)
class ResistanceEntry:
    n: int
    method: str
    R: float
    gap: float
    residual: float
    by_mesh: dict = field(default_factory=dict)


@lru_cache(maxsize=256)
def _grid_solve(n: int, rho, k: int, tol: float):
    cfg = WeightConfig(rho)
    g = build_grid_graph(n, cfg, k)
    sol = effective_resistance(g, side_boundary(g), tol=tol)
    return sol.resistance, sol.duality_gap, sol.residual


@lru_cache(maxsize=256)
def _graph_solve(n: int, rho, kind: str, tol: float):
    cfg = WeightConfig(rho)
    g = build_cross_graph(n, cfg) if kind == "G" else build_diag_graph(n, cfg)
    sol = effective_resistance(g, side_boundary(g), tol=tol)
    return sol.resistance, sol.duality_gap, sol.residual


def richardson(values: dict) -> float:
    """Extrapolate ``R(k) = R + a / k^2`` from the two finest meshes."""
    ks = sorted(values)
    if len(ks) == 1:
        return values[ks[0]]
    k1, k2 = ks[-2], ks[-1]
    w = (k2 / k1) ** 2
    return (w * values[k2] - values[k1]) / (w - 1)


def block_resistance(n: int, cfg: WeightConfig, method: str = "grid", meshes=DEFAULT_MESHES, tol=DEFAULT_TOL):
    """One entry of the sequence: ``R_n`` (grid, extrapolated), ``R_n^G`` or ``R_n^D``."""
    if n < 0:
        raise ValueError("level must be non-negative")
    if method == "grid":
        if n == 0:
            return ResistanceEntry(0, "grid", 1.0, 0.0, 0.0, {})
        vals, gap, res = {}, 0.0, 0.0
        for k in meshes:
            R, g, r = _grid_solve(n, cfg.rho, k, tol)
            vals[k] = R
            gap = max(gap, g)
            res = max(res, r)
        return ResistanceEntry(n, "grid", richardson(vals), gap, res, vals)
    if method in ("G", "D"):
        R, g, r = _graph_solve(n, cfg.rho, method, tol)
        return ResistanceEntry(n, method, R, g, r, {})
    raise ValueError(f"unknown method {method!r}")


def resistance_sequence(cfg: WeightConfig, n_max: int, method: str = "grid", meshes=DEFAULT_MESHES, tol=DEFAULT_TOL):
    """Entries for ``n = 1..n_max``."""
    return [block_resistance(n, cfg, method, meshes, tol) for n in range(1, n_max + 1)]


@dataclass(frozen=True)
class LambdaEstimate:
    fit: float
    fekete_lo: float
    fekete_hi: float
    c: float

    @property
    def width(self) -> float:
        return self.fekete_hi - self.fekete_lo


def estimate_lambda(table) -> LambdaEstimate:
    """Growth rate of ``R_n`` three ways.

    ``table`` maps ``n >= 1`` to ``R_n`` (a dict, or a list of entries /
    ``(n, R)`` pairs).  The fit is ``exp`` of the least-squares slope of
    ``log R_n`` against ``n``.  The constant ``c >= 1`` is the smallest value
    with ``c^{-1} R_n R_m <= R_{n+m} <= c R_n R_m`` over all computed pairs;
    sub- and super-multiplicativity then bound the limit by
    ``sup_n (R_n / c)^{1/n} <= lambda <= inf_n (c R_n)^{1/n}``.
    """
    if isinstance(table, dict):
        data = dict(table)
    else:
        data = {}
        for row in table:
            n, R = (row.n, row.R) if isinstance(row, ResistanceEntry) else row
            data[int(n)] = float(R)
    ns = sorted(n for n in data if n >= 1)
    if len(ns) < 3 or ns != list(range(ns[0], ns[0] + len(ns))):
        raise ValueError("need at least three consecutive levels")
    logs = np.log([data[n] for n in ns])
    slope = np.polyfit(np.array(ns, dtype=float), logs, 1)[0]
    ratios = [data[a + b] / (data[a] * data[b]) for a in ns for b in ns if a + b in data]
    c = max([1.0] + [max(r, 1.0 / r) for r in ratios])
    lo = max((data[n] / c) ** (1.0 / n) for n in ns)
    hi = min((c * data[n]) ** (1.0 / n) for n in ns)
    return LambdaEstimate(float(math.exp(slope)), float(lo), float(hi), float(c))


def beta_from_lambda(cfg: WeightConfig, lam: float) -> float:
    """``log(4 + 4 rho)/log 3 + log(lambda)/log 3``."""
    return cfg.alpha + math.log(lam) / math.log(3)


def psi(r: float, beta: float) -> float:
    """Space-time scale function: ``r^beta`` for ``r >= 1`` and ``r^2`` below."""
    if r <= 0:
        raise ValueError("r must be positive")
    return r**beta if r >= 1 else r * r


@dataclass(frozen=True)
class InequalityRecord:
    name: str
    n: int
    m: int
    lhs: float
    rhs: float
    slack: float
    margin: float
    holds: bool


def _record(name, n, m, lhs, rhs, slack):
    margin = rhs + slack - lhs
    return InequalityRecord(name, n, m, lhs, rhs, slack, margin, bool(margin >= 0))


def verify_inequalities(cfg: WeightConfig, pairs, meshes=DEFAULT_MESHES, tol=DEFAULT_TOL) -> list[InequalityRecord]:
    """Check the multiplicative comparisons between the three resistances.

    For each ``(n, m)``: ``R_{n+m} <= R_n R_m^G``, ``R_m^D <= R_m^G``,
    ``(1/2) R_n R_m^D <= R_{n+m}`` and the implied ``R_m^D <= 2 R_m^G``.
    The slack is four times the sum of the duality gaps of the solves
    involved; a record with negative margin is a violation.
    """
    out = []
    for n, m in pairs:
        Rn = block_resistance(n, cfg, "grid", meshes, tol)
        Rnm = block_resistance(n + m, cfg, "grid", meshes, tol)
        G = block_resistance(m, cfg, "G", tol=tol)
        D = block_resistance(m, cfg, "D", tol=tol)
        s_up = SLACK_FACTOR * (Rnm.gap + Rn.gap * G.R + G.gap * Rn.R)
        s_dg = SLACK_FACTOR * (D.gap + G.gap)
        s_lo = SLACK_FACTOR * (Rnm.gap + 0.5 * (Rn.gap * D.R + D.gap * Rn.R))
        out.append(_record("upper", n, m, Rnm.R, Rn.R * G.R, s_up))
        out.append(_record("diag_le_cross", n, m, D.R, G.R, s_dg))
        out.append(_record("lower", n, m, 0.5 * Rn.R * D.R, Rnm.R, s_lo))
        out.append(_record("diag_le_twice_cross", n, m, D.R, 2 * G.R, s_dg))
    return out


@dataclass
class ScalingReport:
    rho: str
    rows: list
    lambda_fit: float
    lambda_fekete_lo: float
    lambda_fekete_hi: float
    fekete_c: float
    beta: float
    lambdas_by_method: dict
    ledger: list

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    @property
    def violations(self) -> list:
        return [r for r in self.ledger if not r["holds"]]


def scaling_report(cfg: WeightConfig, n_max: int = 3, meshes=DEFAULT_MESHES, pairs=None, tol=DEFAULT_TOL) -> ScalingReport:
    """Resistance table for all three methods, exponents and the inequality ledger."""
    if n_max < 3:
        raise ValueError("n_max must be at least 3")
    rows, lams = [], {}
    for method in ("grid", "G", "D"):
        seq = resistance_sequence(cfg, n_max, method, meshes, tol)
        rows += [asdict(e) for e in seq]
        est = estimate_lambda(seq)
        lams[method] = asdict(est)
    grid = lams["grid"]
    if pairs is None:
        pairs = [(n, m) for n in range(1, n_max) for m in range(1, n_max) if n + m <= n_max]
    ledger = [asdict(r) for r in verify_inequalities(cfg, pairs, meshes, tol)]
    for r in rows:
        r["by_mesh"] = {str(k): v for k, v in r["by_mesh"].items()}
    return ScalingReport(
        rho=str(cfg.rho),
        rows=rows,
        lambda_fit=grid["fit"],
        lambda_fekete_lo=grid["fekete_lo"],
        lambda_fekete_hi=grid["fekete_hi"],
        fekete_c=grid["c"],
        beta=beta_from_lambda(cfg, grid["fit"]),
        lambdas_by_method=lams,
        ledger=ledger,
    )
