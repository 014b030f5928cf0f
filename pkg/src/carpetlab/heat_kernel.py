"""Transition densities of the lazy weighted walk on the unit-cell graph of a block.

The level-``n`` chain lives on the block ``F_0^N`` shrunk by ``3^{-n}``: node
masses are divided by ``(4 + 4 rho)^n`` and conductances multiplied by
``lambda^n``, so one unit of the level-``n`` clock is ``3^{n beta}`` units of
the unscaled clock.  One lazy step lasts ``delta = (1/2) min_v m(v) / g(v)``
and moves with ``P = I - delta M^{-1} L``; every node then stays put with
probability at least one half.  The density ``q_t(x, y)`` is
``P^s(x, y) / m(y)`` with ``s = floor(t / delta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .geometry import WeightConfig
from .network import CellGraph, build_grid_graph
from .walks import TransitionSampler, make_rng

STEP_EPS = 1e-9  # guards floor(t / delta) against rounding just below an integer


@dataclass(frozen=True, eq=False)
class HeatChain:
    graph: CellGraph
    cfg: WeightConfig
    block: int  # N: the chain lives on F_0^N
    level: int  # n: lengths are scaled by 3^-n
    lam: float
    mass: np.ndarray
    operator: sp.csr_matrix
    delta: float

    @property
    def space(self) -> float:
        return 3.0 ** (-self.level)

    @property
    def beta(self) -> float:
        return self.cfg.alpha + math.log(self.lam) / math.log(3)

    @property
    def coords(self) -> np.ndarray:
        return self.graph.coords * self.space

    def _lookup(self, x) -> int:
        u = np.asarray(x, dtype=float) / self.space
        key = 2 * np.floor(u).astype(np.int64) + 1
        return int(self.graph.find(key[None, :])[0])

    def contains(self, x) -> bool:
        return self._lookup(x) >= 0

    def node(self, x) -> int:
        """Node whose unit cell contains the point ``x`` (level-``n`` coordinates)."""
        idx = self._lookup(x)
        if idx < 0:
            raise ValueError(f"point {tuple(x)} is not in the block")
        return idx

    def steps(self, t: float) -> int:
        s = math.floor(t / self.delta + STEP_EPS)
        if s < 1:
            raise ValueError(f"t={t} is below one clock step ({self.delta:.3g})")
        return s

    def ball_mass(self, x, r: float) -> float:
        """``mu_n`` of the sup-norm ball ``B(x, r)`` intersected with the block."""
        c = self.graph.coords
        lo = c - 0.5
        u = np.asarray(x, dtype=float) / self.space
        R = r / self.space
        ox = np.clip(np.minimum(lo[:, 0] + 1, u[0] + R) - np.maximum(lo[:, 0], u[0] - R), 0, None)
        oy = np.clip(np.minimum(lo[:, 1] + 1, u[1] + R) - np.maximum(lo[:, 1], u[1] - R), 0, None)
        return float(np.sum(self.mass * ox * oy))


def heat_chain(block: int, cfg: WeightConfig, level: int, lam: float) -> HeatChain:
    """Lazy walk on the unit cells of ``F_0^block`` viewed at scale ``3^-level``."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    g = build_grid_graph(block, cfg, 1, face_nodes=False, boundary_faces=False)
    m = g.mass / float(cfg.mass_normalizer) ** level
    L = g.laplacian * lam**level
    c = np.asarray(L.diagonal()).ravel()
    delta = 0.5 * float(np.min(m / c))
    P = (sp.identity(g.n_nodes, format="csr") - delta * sp.diags(1.0 / m) @ L).tocsr()
    return HeatChain(g, cfg, block, level, float(lam), m, P, delta)


def density_series(chain: HeatChain, x: int, steps) -> np.ndarray:
    """Rows ``q(x, .)`` after each requested step count (any order)."""
    steps = np.asarray(steps, dtype=np.int64)
    order = np.argsort(steps)
    out = np.empty((steps.size, chain.graph.n_nodes))
    f = np.zeros(chain.graph.n_nodes)
    f[x] = 1.0 / chain.mass[x]
    done = 0
    for i in order:
        for _ in range(int(steps[i]) - done):
            f = chain.operator @ f
        done = int(steps[i])
        out[i] = f
    return out


def transition_density(
    chain: HeatChain, t: float, x, y, method: str = "power", samples: int = 20000, seed: int = 0
) -> tuple[float, float]:
    """``q_t(x, y)`` and its standard error (zero for the power method).

    ``x`` and ``y`` are node ids or points.  ``mc`` runs ``samples`` lazy walks
    for ``floor(t / delta)`` steps and divides the frequency of ending at ``y``
    by ``m(y)``.
    """
    xi = int(x) if np.isscalar(x) else chain.node(x)
    yi = int(y) if np.isscalar(y) else chain.node(y)
    s = chain.steps(t)
    if method == "power":
        return float(density_series(chain, xi, [s])[0, yi]), 0.0
    if method == "mc":
        if samples <= 0:
            raise ValueError("Monte Carlo mode needs samples > 0")
        sampler = TransitionSampler(chain.graph, chain.operator)
        hits = 0
        batch = 20000
        for b, lo in enumerate(range(0, samples, batch)):
            rng = make_rng(seed, b)
            cur = np.full(min(batch, samples - lo), xi, dtype=np.int64)
            for _ in range(s):
                cur = sampler.step(cur, rng.random(cur.size))
            hits += int(np.count_nonzero(cur == yi))
        p = hits / samples
        se = math.sqrt(max(p * (1 - p), 1.0 / samples) / samples)
        return p / chain.mass[yi], se / chain.mass[yi]
    raise ValueError(f"unknown method {method!r}")


@dataclass
class KernelProfile:
    level: int
    x: tuple
    beta: float
    samples: list  # (t, x, y, q)
    diagonal: list  # (t, q_t(x, x))
    normalized: list  # q_t(x, x) * mu(B(x, t^{1/beta}))
    band_min: float = float("nan")
    band_max: float = float("nan")
    slope: float = float("nan")
    meta: dict = field(default_factory=dict)

    @property
    def width(self) -> float:
        return self.band_max / self.band_min

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["width"] = self.width
        return d


def decade(t0: float, points: int = 11) -> np.ndarray:
    return t0 * np.logspace(0, 1, points)


def on_diagonal_profile(chain: HeatChain, x, ts, beta: float | None = None) -> KernelProfile:
    """``q_t(x, x)`` over ``ts`` and its product with ``mu(B(x, t^{1/beta}))``.

    ``slope`` is the least-squares slope of ``log q_t(x, x)`` against ``log t``.
    """
    beta = chain.beta if beta is None else beta
    xi = chain.node(x)
    ts = np.asarray(ts, dtype=float)
    rows = density_series(chain, xi, [chain.steps(t) for t in ts])
    q = rows[:, xi]
    prod = np.array([qq * chain.ball_mass(chain.coords[xi], t ** (1 / beta)) for qq, t in zip(q, ts)])
    xc = tuple(float(v) for v in chain.coords[xi])
    slope = float(np.polyfit(np.log(ts), np.log(q), 1)[0]) if ts.size > 1 else float("nan")
    return KernelProfile(
        chain.level,
        xc,
        beta,
        [(float(t), xc, xc, float(v)) for t, v in zip(ts, q)],
        [(float(t), float(v)) for t, v in zip(ts, q)],
        [float(v) for v in prod],
        float(prod.min()),
        float(prod.max()),
        slope,
        {"rho": str(chain.cfg.rho), "block": chain.block, "delta": chain.delta, "lambda": chain.lam},
    )


def kernel_samples(chain: HeatChain, xs, ts, max_dist: float | None = None) -> list:
    """``(t, x, y, q)`` for every start point in ``xs``, time in ``ts`` and node ``y``."""
    ts = np.asarray(ts, dtype=float)
    steps = [chain.steps(t) for t in ts]
    c = chain.coords
    out = []
    for x in xs:
        xi = chain.node(x)
        rows = density_series(chain, xi, steps)
        d = np.max(np.abs(c - c[xi]), axis=1)
        keep = np.arange(c.shape[0]) if max_dist is None else np.nonzero(d <= max_dist)[0]
        xc = tuple(float(v) for v in c[xi])
        for t, row in zip(ts, rows):
            out += [(float(t), xc, (float(c[j, 0]), float(c[j, 1])), float(row[j])) for j in keep]
    return out


@dataclass
class EnvelopeFit:
    log_c1: float
    c2: float
    log_c3: float
    c4: float
    used: int
    excluded: int
    violations: list

    @property
    def constants(self) -> tuple:
        return (math.exp(self.log_c1), self.c2, math.exp(self.log_c3), self.c4)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["constants"] = list(self.constants)
        return d


def _envelope_terms(chain: HeatChain, samples, beta: float):
    scale = 3.0**chain.level
    ys, zs, bad, excluded = [], [], [], 0
    for t, x, y, q in samples:
        d = max(abs(x[0] - y[0]), abs(x[1] - y[1]))
        if scale**beta * t < max(1.0, scale * d):
            excluded += 1
            continue
        if q <= 0:
            bad.append((t, x, y, q))
            continue
        ys.append(math.log(q * chain.ball_mass(x, t ** (1 / beta))))
        zs.append((d**beta / t) ** (1 / (beta - 1)))
    return np.array(ys), np.array(zs), bad, excluded


def subgaussian_envelope_fit(chain: HeatChain, samples, beta: float | None = None) -> EnvelopeFit:
    """Tightest constants with ``C1 e^{-C2 z} <= q mu(B) <= C3 e^{-C4 z}``, ``z = (d^beta / t)^{1/(beta-1)}``.

    Each side is a linear program in ``(log C, C')`` minimising the total
    log-gap to the samples.  Samples outside ``3^{n beta} t >= max(1, 3^n d)``
    are excluded; samples with ``q = 0`` violate every lower bound and are
    listed.
    """
    beta = chain.beta if beta is None else beta
    y, z, bad, excluded = _envelope_terms(chain, samples, beta)
    if y.size == 0:
        raise ValueError("no samples inside the valid window")
    n = y.size
    # upper: y <= a - c z, minimise sum(a - c z - y)
    up = linprog([n, -z.sum()], A_ub=np.column_stack([-np.ones(n), z]), b_ub=-y, bounds=[(None, None), (0, None)], method="highs")
    # lower: a - c z <= y, minimise sum(y - a + c z)
    lo = linprog([-n, z.sum()], A_ub=np.column_stack([np.ones(n), -z]), b_ub=y, bounds=[(None, None), (0, None)], method="highs")
    if not (up.success and lo.success):
        raise RuntimeError("envelope linear program failed")
    return EnvelopeFit(float(lo.x[0]), float(lo.x[1]), float(up.x[0]), float(up.x[1]), int(n), excluded, bad)


def decay_exponent(chain: HeatChain, samples, beta: float | None = None, cutoff: float = math.exp(-2)) -> float:
    """Slope of ``log(-log(q mu(B)))`` against ``log(d^beta / t)`` in the decay regime.

    Only samples with ``q mu(B) < cutoff`` enter the regression; the bound
    predicts a slope of ``1 / (beta - 1)``.
    """
    beta = chain.beta if beta is None else beta
    y, z, _, _ = _envelope_terms(chain, samples, beta)
    keep = (y < math.log(cutoff)) & (z > 0)
    if np.count_nonzero(keep) < 3:
        raise ValueError("too few samples in the decay regime")
    w = np.log(z[keep]) * (beta - 1)  # log(d^beta / t)
    return float(np.polyfit(w, np.log(-y[keep]), 1)[0])


@dataclass(frozen=True)
class RescalingRow:
    t: float
    x: tuple
    y: tuple
    direct: float
    rescaled: float

    @property
    def rel_error(self) -> float:
        return abs(self.direct - self.rescaled) / abs(self.direct)


def rescaling_check(coarse: HeatChain, fine: HeatChain, ts, pairs) -> list[RescalingRow]:
    """Compare ``q^{(n+1)}_t(x, y)`` with ``(4 + 4 rho) q^{(n)}_{3^beta t}(3x, 3y)``.

    ``coarse`` is the level-``n`` chain and ``fine`` the level-``n+1`` chain on
    the same block.  The left side runs the fine chain; the right side runs
    the coarse chain on tripled points and a clock stretched by
    ``3^beta = (4 + 4 rho) lambda``.
    """
    if fine.level != coarse.level + 1 or fine.block != coarse.block:
        raise ValueError("need consecutive levels on one block")
    M = float(coarse.cfg.mass_normalizer)
    stretch = M * coarse.lam
    out = []
    for x, y in pairs:
        xi, yi = fine.node(x), fine.node(y)
        X = 3 * np.asarray(x, dtype=float)
        Y = 3 * np.asarray(y, dtype=float)
        Xi, Yi = coarse.node(X), coarse.node(Y)
        direct = density_series(fine, xi, [fine.steps(t) for t in ts])[:, yi]
        scaled = density_series(coarse, Xi, [coarse.steps(stretch * t) for t in ts])[:, Yi]
        out += [
            RescalingRow(float(t), tuple(map(float, x)), tuple(map(float, y)), float(a), float(M * b))
            for t, a, b in zip(ts, direct, scaled)
        ]
    return out
