"""Weighted random walks on grid graphs of the pre-carpet.

A walk at node ``v`` jumps to neighbour ``w`` with probability
``g(v, w) / g(v)``.  Hitting laws are computed two ways: exactly, as
harmonic extensions of boundary indicators, and by simulation.  Time is
measured with the holding time ``m(v) / g(v)`` at each visit, which makes
expected exit times solve ``L h = m``.

Geometry of the 2x2 blocks: the four squares of side ``3^m`` around the
origin are ``S_1`` (upper right), ``S_2`` (upper left), ``S_3`` (lower left)
and ``S_4`` (lower right).  An unfilled square is a copy of ``F_0^m`` whose
unit-cell weights are scaled by a per-square multiplier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError
from .geometry import WeightConfig, unit_cells
from .network import CellGraph, build_grid_graph
from .solvers import dirichlet_solve, harmonic_extensions

PATTERNS = {
    "a": (1,),
    "b": (1, 2),
    "c": (1, 4),
    "d": (1, 2, 3),
    "e": (1, 2, 4),
    "f": (1, 3, 4),
    "g": (1, 2, 3, 4),
}
SQUARE_ORIGINS = {1: (0, 0), 2: (-1, 0), 3: (-1, -1), 4: (0, -1)}


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, stream)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & (2**64 - 1), int(stream)])))


# ---------------------------------------------------------------- domains


@dataclass(frozen=True)
class SquareConfig:
    """Which of ``S_1..S_4`` are unfilled, their weights and the inner level ``m``."""

    pattern: str = "g"
    cfg: WeightConfig = field(default_factory=WeightConfig)
    m: int = 1
    multipliers: tuple | None = None

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"pattern must be one of {sorted(PATTERNS)}")
        if self.m < 0:
            raise ValueError("m must be non-negative")
        mult = self.multipliers
        if mult is None:
            r = self.cfg.rho_float
            mult = (1.0, r, 1.0, r)
        mult = tuple(float(v) for v in mult)
        if len(mult) != 4 or min(mult) <= 0:
            raise ValueError("need four positive multipliers")
        object.__setattr__(self, "multipliers", mult)

    @property
    def unfilled(self) -> tuple:
        return PATTERNS[self.pattern]

    @property
    def side(self) -> int:
        return 3**self.m

    def mu(self, i: int) -> float:
        """``mu_0(S_i)``; zero for a filled square."""
        i = (i - 1) % 4 + 1
        if i not in self.unfilled:
            return 0.0
        return self.multipliers[i - 1] * float(self.cfg.mass_normalizer) ** self.m

    def cells(self, squares=None):
        keep = [s for s in (squares or (1, 2, 3, 4)) if s in self.unfilled]
        ci, cj, e = unit_cells(self.m)
        w = self.cfg.weights_from_exponents(e)
        I, J, W = [], [], []
        for s in keep:
            ox, oy = SQUARE_ORIGINS[s]
            I.append(ci + ox * self.side)
            J.append(cj + oy * self.side)
            W.append(self.multipliers[s - 1] * w)
        return np.concatenate(I), np.concatenate(J), np.concatenate(W)

    def graph(self, k: int, squares=None, **kw) -> CellGraph:
        return build_grid_graph(self.cells(squares), self.cfg, k, **kw)


@dataclass(frozen=True)
class BoundaryPartition:
    """Absorbing nodes and their (fractional) membership in labelled segments."""

    nodes: np.ndarray
    weights: np.ndarray  # (len(nodes), n_segments), rows sum to 1
    labels: tuple

    def restrict(self, keep_labels) -> "BoundaryPartition":
        cols = [self.labels.index(l) for l in keep_labels]
        w = self.weights[:, cols]
        rows = w.sum(axis=1) > 0
        return BoundaryPartition(self.nodes[rows], w[rows], tuple(keep_labels))


def perimeter_partition(graph: CellGraph, box, seg_len, start, prefix: str = "L") -> BoundaryPartition:
    """Label the nodes lying on the boundary of ``box`` by counterclockwise segments.

    ``box = (x0, y0, x1, y1)`` and ``start`` (a point on the right side) are in
    graph units; segment 1 begins at ``start``.  Positions are compared on the
    exact integer keys; a node exactly at a segment endpoint is split evenly
    between the two segments.
    """
    s = graph.scale
    x0, y0, x1, y1 = (int(round(v * s)) for v in box)
    L = int(round(seg_len * s))
    sx, sy = (int(round(v * s)) for v in start)
    if sx != x1:
        raise ValueError("start must lie on the right side")
    W, H = x1 - x0, y1 - y0
    P = 2 * (W + H)
    if P % L:
        raise ValueError("segment length does not divide the perimeter")
    nseg = P // L
    kx, ky = graph.keys[:, 0], graph.keys[:, 1]
    t = np.full(graph.n_nodes, -1, dtype=np.int64)
    right = (kx == x1) & (ky >= y0) & (ky <= y1)
    top = (ky == y1) & (kx >= x0) & (kx <= x1) & ~right
    left = (kx == x0) & (ky >= y0) & (ky <= y1) & ~top
    bottom = (ky == y0) & (kx >= x0) & (kx <= x1) & ~right & ~left
    t[right] = ky[right] - y0
    t[top] = H + (x1 - kx[top])
    t[left] = H + W + (y1 - ky[left])
    t[bottom] = 2 * H + W + (kx[bottom] - x0)
    nodes = np.nonzero(t >= 0)[0]
    pos = (t[nodes] - (sy - y0)) % P
    seg = pos // L
    on_edge = pos % L == 0
    weights = np.zeros((nodes.size, nseg))
    weights[np.arange(nodes.size), seg] = np.where(on_edge, 0.5, 1.0)
    prev = (seg - 1) % nseg
    weights[np.arange(nodes.size)[on_edge], prev[on_edge]] += 0.5
    labels = tuple(f"{prefix}{i + 1}" for i in range(nseg))
    return BoundaryPartition(nodes, weights, labels)


# ---------------------------------------------------------- hitting laws


@dataclass(frozen=True)
class HittingDistribution:
    labels: tuple
    mass: np.ndarray
    stderr: np.ndarray
    samples: int  # 0 for an exact solve

    def __getitem__(self, label: str) -> float:
        return float(self.mass[self.labels.index(label)])

    def rows(self) -> list:
        return [(l, float(m), float(s)) for l, m, s in zip(self.labels, self.mass, self.stderr)]


class TransitionSampler:
    """Vectorised sampling of the next node for many walkers at once."""

    def __init__(self, graph: CellGraph, matrix: sp.spmatrix | None = None):
        # ``matrix`` replaces the adjacency, e.g. a lazy transition matrix
        A = (graph.adjacency if matrix is None else matrix).tocsr().copy()
        A.sort_indices()
        deg = np.diff(A.indptr)
        tot = np.asarray(A.sum(axis=1)).ravel()
        prob = A.data / np.repeat(np.where(tot > 0, tot, 1.0), deg)
        row = np.repeat(np.arange(A.shape[0]), deg)
        # row r occupies (r, r + 1] on a single increasing axis
        run = np.cumsum(prob)
        before = np.concatenate([[0.0], run])[A.indptr[:-1]]
        cum = row + (run - np.repeat(before, deg))
        last = A.indptr[1:] - 1
        cum[last[deg > 0]] = np.nonzero(deg > 0)[0] + 1.0
        self.cum = cum
        self.indices = A.indices
        mass = graph.mass if graph.mass is not None else np.zeros(A.shape[0])
        self.hold = mass / np.where(tot > 0, tot, np.inf)

    def step(self, cur: np.ndarray, u: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self.cum, cur + u, side="right")
        pos = np.minimum(pos, self.cum.size - 1)
        return self.indices[pos]


def simulate_absorption(graph: CellGraph, start: int, absorbing: np.ndarray, n_paths: int, seed: int, step_cap: int = 10**7, batch: int = 20000):
    """Run ``n_paths`` walks from ``start`` until they hit ``absorbing``.

    Returns ``(hit_node, elapsed_time)`` per path; paths are generated in
    batches, batch ``b`` drawing from stream ``b`` of the seed, so results do
    not depend on how the work is scheduled.
    """
    sampler = TransitionSampler(graph)
    absorb = np.zeros(graph.n_nodes, dtype=bool)
    absorb[absorbing] = True
    hits = np.empty(n_paths, dtype=np.int64)
    times = np.zeros(n_paths)
    for b, lo in enumerate(range(0, n_paths, batch)):
        rng = make_rng(seed, b)
        n = min(batch, n_paths - lo)
        cur = np.full(n, start, dtype=np.int64)
        clock = np.zeros(n)
        active = np.nonzero(~absorb[cur])[0]
        steps = 0
        while active.size:
            if steps >= step_cap:
                raise ConvergenceError("walk step cap reached", bound=active.size, iterations=steps)
            clock[active] += sampler.hold[cur[active]]
            cur[active] = sampler.step(cur[active], rng.random(active.size))
            active = active[~absorb[cur[active]]]
            steps += 1
        hits[lo : lo + n] = cur
        times[lo : lo + n] = clock
    return hits, times


def hitting_distribution(
    graph: CellGraph, start: int, partition: BoundaryPartition, mode: str = "exact", samples: int = 0, seed: int = 0
) -> HittingDistribution:
    """Law of the segment where the walk from ``start`` is absorbed."""
    if partition.nodes.size == 0:
        raise ValueError("empty absorbing set")
    if mode == "exact":
        H = harmonic_extensions(graph.laplacian, partition.nodes, partition.weights)
        return HittingDistribution(partition.labels, H[start].copy(), np.zeros(len(partition.labels)), 0)
    if mode in ("mc", "monte_carlo"):
        if samples <= 0:
            raise ValueError("Monte Carlo mode needs samples > 0")
        hits, _ = simulate_absorption(graph, start, partition.nodes, samples, seed)
        row = np.full(graph.n_nodes, -1)
        row[partition.nodes] = np.arange(partition.nodes.size)
        W = partition.weights[row[hits]]
        mean = W.mean(axis=0)
        se = W.std(axis=0, ddof=1) / math.sqrt(samples)
        return HittingDistribution(partition.labels, mean, se, samples)
    raise ValueError(f"unknown mode {mode!r}")


# ------------------------------------------------------------ corner moves


def corner_domain(sq: SquareConfig, k: int):
    """``S_1 ∪ S_4`` (or ``S_1`` alone when ``S_4`` is filled) with its 12 labelled segments."""
    g = sq.graph(k, squares=(1, 4))
    s = sq.side
    part = perimeter_partition(g, (0, -s, s, s), s / 2, (s, 0))
    return g, part


def start_nodes(graph: CellGraph, xs) -> np.ndarray:
    """Nodes on the line ``y = 0`` nearest to the requested abscissae."""
    on_axis = np.nonzero(graph.keys[:, 1] == 0)[0]
    cx = graph.coords[on_axis, 0]
    return np.array([on_axis[np.argmin(np.abs(cx - x))] for x in xs], dtype=np.int64)


def default_samples(side: float, count: int = 5) -> np.ndarray:
    """Evenly spread abscissae in ``[0, side/2]`` (excluding the corner)."""
    return side / 2 * (np.arange(1, count + 1) / count)


@dataclass(frozen=True)
class MoveReport:
    pattern: str
    m: int
    k: int
    rho: str
    points: list  # (x, probabilities of the tracked segment)
    bound: float
    slack: float
    worst: float

    @property
    def holds(self) -> bool:
        return self.worst >= self.bound - self.slack


def corner_move_check(sq: SquareConfig, xs=None, k: int = 27, slack: float = 0.02, mode: str = "exact", samples: int = 0, seed: int = 0) -> MoveReport:
    """Probability of leaving ``S_1 ∪ S_4`` through ``L_6`` from points of ``[0, 3^m/2] x {0}``.

    The bound is ``1/6`` when ``S_4`` is filled and
    ``mu_0(S_1) / (6 (mu_0(S_1) + mu_0(S_4)))`` otherwise.
    """
    g, part = corner_domain(sq, k)
    xs = default_samples(sq.side) if xs is None else np.asarray(xs, dtype=float)
    starts = start_nodes(g, xs)
    if mode == "exact":
        H = harmonic_extensions(g.laplacian, part.nodes, part.weights)
        p6 = H[starts, part.labels.index("L6")]
    else:
        p6 = np.array([hitting_distribution(g, s, part, "mc", samples, seed + i)["L6"] for i, s in enumerate(starts)])
    if 4 in sq.unfilled:
        bound = sq.mu(1) / (6 * (sq.mu(1) + sq.mu(4)))
    else:
        bound = 1.0 / 6.0
    pts = [(float(g.coords[s, 0]), float(p)) for s, p in zip(starts, p6)]
    return MoveReport(sq.pattern, sq.m, k, str(sq.cfg.rho), pts, bound, slack, float(p6.min()))


def reflected_square(sq: SquareConfig, k: int):
    """``S_1`` with reflecting left and bottom sides, absorbing on the right and top sides.

    Segments ``L1..L4`` run counterclockwise from ``(3^m, 0)``: two halves
    of the right side, then two halves of the top side.
    """
    g = sq.graph(k, squares=(1,))
    s = sq.side
    part = perimeter_partition(g, (0, 0, s, s), s / 2, (s, 0))
    return g, part.restrict(("L1", "L2", "L3", "L4"))


def reflected_quadrant_check(sq: SquareConfig, xs=None, k: int = 27, slack: float = 0.02) -> MoveReport:
    """``P(X_T in L_1) >= 1/4`` for the walk reflected on two sides of ``S_1``."""
    g, part = reflected_square(sq, k)
    xs = default_samples(sq.side) if xs is None else np.asarray(xs, dtype=float)
    starts = start_nodes(g, xs)
    H = harmonic_extensions(g.laplacian, part.nodes, part.weights)
    p1 = H[starts, 0]
    pts = [(float(g.coords[s, 0]), [float(v) for v in H[s]]) for s in starts]
    return MoveReport(sq.pattern, sq.m, k, str(sq.cfg.rho), pts, 0.25, slack, float(p1.min()))


# ----------------------------------------------------------------- folding


@dataclass(frozen=True)
class FoldingResult:
    x: float
    segments: tuple
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def folding_check(sq: SquareConfig, x: float, segments=("L6",), k: int = 27) -> FoldingResult:
    """Two-square hitting expectation versus the folded one-square one.

    ``lhs = E^x[f(W_T)]`` for the walk on ``S_1 ∪ S_4`` killed on its outer
    boundary; ``rhs = mu_0(S_1)/(mu_0(S_1)+mu_0(S_4)) E^x[f(X_T)]`` for the
    walk on ``S_1`` reflected on ``y = 0`` and killed on the rest of its
    boundary.  ``f`` is the indicator of the union of ``segments`` (labels
    among ``L1..L6``, the part of the boundary in ``S_1``).
    """
    if not (1 in sq.unfilled and 4 in sq.unfilled):
        raise ValueError("folding needs S_1 and S_4 unfilled")
    allowed = ("L1", "L2", "L3", "L4", "L5", "L6")
    if any(s not in allowed for s in segments):
        raise ValueError("segments must lie on the boundary of S_1 away from y = 0")
    g2, part2 = corner_domain(SquareConfig("c", sq.cfg, sq.m, sq.multipliers), k)
    g1 = sq.graph(k, squares=(1,))
    s = sq.side
    part1 = perimeter_partition(g1, (0, -s, s, s), s / 2, (s, 0))
    cols2 = [part2.labels.index(l) for l in segments]
    cols1 = [part1.labels.index(l) for l in segments]
    x2 = start_nodes(g2, [x])[0]
    x1 = start_nodes(g1, [x])[0]
    if abs(g1.coords[x1, 0] - g2.coords[x2, 0]) > 1e-12:
        raise ValueError("start nodes of the two domains differ")
    f2 = part2.weights[:, cols2].sum(axis=1)
    f1 = part1.weights[:, cols1].sum(axis=1)
    lhs = harmonic_extensions(g2.laplacian, part2.nodes, f2)[x2, 0]
    rhs_raw = harmonic_extensions(g1.laplacian, part1.nodes, f1)[x1, 0]
    factor = sq.mu(1) / (sq.mu(1) + sq.mu(4))
    return FoldingResult(float(g2.coords[x2, 0]), tuple(segments), float(lhs), float(factor * rhs_raw))


# ----------------------------------------------------------------- Y chain


def y_chain_law(sq: SquareConfig) -> np.ndarray:
    """Closed-form transition matrix of the sequence of arms visited.

    Arm ``A_i`` separates ``S_{i-1}`` and ``S_i``; from it the next arm is
    ``A_{i+1}`` with probability ``mu(S_i) / (mu(S_i) + mu(S_{i-1}))``.  An
    arm with both neighbouring squares filled cannot be visited and gets a
    zero row.
    """
    P = np.zeros((4, 4))
    for i in range(1, 5):
        a, b = sq.mu(i), sq.mu(i - 1)
        if a + b == 0:
            continue
        P[i - 1, i % 4] = a / (a + b)
        P[i - 1, (i - 2) % 4] = b / (a + b)
    return P


def arm_labels(graph: CellGraph, side: float) -> np.ndarray:
    """Arm index 1..4 for nodes on the half-axes strictly inside the box, else 0."""
    s = graph.scale
    kx, ky = graph.keys[:, 0], graph.keys[:, 1]
    lim = int(round(side * s))
    lab = np.zeros(graph.n_nodes, dtype=np.int8)
    lab[(ky == 0) & (kx > 0) & (kx < lim)] = 1
    lab[(kx == 0) & (ky > 0) & (ky < lim)] = 2
    lab[(ky == 0) & (kx < 0) & (kx > -lim)] = 3
    lab[(kx == 0) & (ky < 0) & (ky > -lim)] = 4
    return lab


@dataclass(frozen=True)
class YChainEstimate:
    counts: np.ndarray
    frequencies: np.ndarray
    stderr: np.ndarray
    law: np.ndarray

    def max_z(self) -> float:
        """Largest ``|freq - p| / SE`` over entries with positive standard error."""
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.abs(self.frequencies - self.law) / self.stderr
        mask = self.stderr > 0
        exact_ok = np.all(np.abs(self.frequencies - self.law)[~mask & (self.counts.sum(axis=1, keepdims=True) > 0)] == 0)
        return float(np.max(z[mask], initial=0.0)) if exact_ok else float("inf")


def simulate_y_chain(sq: SquareConfig, k: int = 3, transitions: int = 100_000, seed: int = 0, walkers: int = 4000) -> YChainEstimate:
    """Empirical arm-to-arm transition frequencies on ``D_m``.

    Walkers start on the middle of arm ``A_1``; each time a walker reaches an
    arm other than the last one visited, the transition is recorded.  A
    walker absorbed on the outer boundary restarts.  Standard errors are
    binomial, computed from the closed-form probabilities.
    """
    g = sq.graph(k)
    s = sq.side
    lab = arm_labels(g, s)
    if not np.any(lab == 1):
        raise ValueError("arm A_1 is absent in this pattern")
    kx, ky = g.keys[:, 0], g.keys[:, 1]
    lim = s * g.scale
    outer = (np.abs(kx) == lim) | (np.abs(ky) == lim)
    start = start_nodes(g, [s / 2])[0]
    sampler = TransitionSampler(g)
    counts = np.zeros((4, 4), dtype=np.int64)
    rng = make_rng(seed, 0)
    cur = np.full(walkers, start, dtype=np.int64)
    last = np.ones(walkers, dtype=np.int64)
    total = 0
    steps = 0
    while total < transitions:
        cur = sampler.step(cur, rng.random(walkers))
        steps += 1
        a = lab[cur].astype(np.int64)
        moved = (a > 0) & (a != last)
        if np.any(moved):
            # tally in walker order so the count is reproducible
            np.add.at(counts, (last[moved] - 1, a[moved] - 1), 1)
            total += int(moved.sum())
            last[moved] = a[moved]
        dead = outer[cur]
        if np.any(dead):
            cur[dead] = start
            last[dead] = 1
        if steps > 10**7:
            raise ConvergenceError("Y-chain simulation stalled", iterations=steps)
    law = y_chain_law(sq)
    n = counts.sum(axis=1, keepdims=True)
    freq = np.where(n > 0, counts / np.maximum(n, 1), 0.0)
    se = np.where(n > 0, np.sqrt(law * (1 - law) / np.maximum(n, 1)), 0.0)
    return YChainEstimate(counts, freq, se, law)


# ------------------------------------------------------------ knight moves


def knight_domain(sq: SquareConfig, k: int):
    """``D_m`` for the pattern, absorbing on ``∂[-3^m, 3^m]^2`` with 16 segments."""
    g = sq.graph(k)
    s = sq.side
    part = perimeter_partition(g, (-s, -s, s, s), s / 2, (s, 0))
    return g, part


def knight_move_check(sq: SquareConfig, xs=None, k: int = 9) -> MoveReport:
    """``p_1(x)``: probability of first reaching ``∂D_m`` through ``{3^m} x [0, 3^m/2]``."""
    g, part = knight_domain(sq, k)
    xs = default_samples(sq.side) if xs is None else np.asarray(xs, dtype=float)
    starts = start_nodes(g, xs)
    H = harmonic_extensions(g.laplacian, part.nodes, part.weights)
    p1 = H[starts, 0]
    pts = [(float(g.coords[s, 0]), float(p)) for s, p in zip(starts, p1)]
    return MoveReport(sq.pattern, sq.m, k, str(sq.cfg.rho), pts, 0.0, 0.0, float(p1.min()))


def knight_constant(cfg: WeightConfig, ms=(0, 1, 2), patterns=tuple(PATTERNS), k: int = 9, xs_fraction=None) -> dict:
    """Smallest ``p_1`` over sample points and patterns, for each ``m``."""
    out = {}
    for m in ms:
        worst = math.inf
        for p in patterns:
            sq = SquareConfig(p, cfg, m)
            xs = None if xs_fraction is None else np.asarray(xs_fraction) * sq.side / 2
            worst = min(worst, knight_move_check(sq, xs, k).worst)
        out[m] = worst
    return out


# -------------------------------------------------------------- exit times


@dataclass(frozen=True)
class ExitTimeRow:
    r: float
    mean: float
    stderr: float
    samples: int


@dataclass(frozen=True)
class ExitTimeTable:
    x: tuple
    rows: list
    exponent: float

    def to_dict(self) -> dict:
        return {"x": list(self.x), "rows": [r.__dict__ for r in self.rows], "exponent": self.exponent}


def ball_domain(x, r: float, cfg: WeightConfig, k: int, cells=None) -> tuple[CellGraph, np.ndarray]:
    """Grid graph covering ``B(x, r)`` and the mask of nodes at distance ``>= r`` (absorbing)."""
    if cells is None:
        lo_x, lo_y = math.floor(x[0] - r) - 1, math.floor(x[1] - r) - 1
        hi_x, hi_y = math.ceil(x[0] + r) + 1, math.ceil(x[1] + r) + 1
        g = build_grid_graph((lo_x, lo_y, hi_x, hi_y), cfg, k)
    else:
        g = build_grid_graph(cells, cfg, k)
    d = np.hypot(g.coords[:, 0] - x[0], g.coords[:, 1] - x[1])
    return g, d >= r


def exit_time(x, r: float, cfg: WeightConfig, k: int = 3, mode: str = "exact", samples: int = 0, seed: int = 0, cells=None) -> ExitTimeRow:
    """Mean exit time of ``B(x, r)`` under the mass-over-conductance clock.

    ``exact`` solves ``L h = m`` inside the ball with ``h = 0`` outside;
    ``mc`` averages simulated clocks and raises :class:`ConvergenceError`
    when the standard error exceeds 10% of the mean.
    """
    g, out = ball_domain(x, r, cfg, k, cells)
    inside = np.nonzero(~out)[0]
    if inside.size == 0:
        raise ValueError("ball contains no node")
    start = inside[np.argmin(np.hypot(g.coords[inside, 0] - x[0], g.coords[inside, 1] - x[1]))]
    if mode == "exact":
        h, _ = dirichlet_solve(g.laplacian, np.nonzero(out)[0], 0.0, rhs=g.mass, method="direct")
        return ExitTimeRow(r, float(h[start]), 0.0, 0)
    _, times = simulate_absorption(g, start, np.nonzero(out)[0], samples, seed)
    mean = float(times.mean())
    se = float(times.std(ddof=1) / math.sqrt(samples))
    if se > 0.1 * mean:
        raise ConvergenceError("too few samples for the exit time", bound=se / mean, iterations=samples)
    return ExitTimeRow(r, mean, se, samples)


def mean_exit_time(x, radii, cfg: WeightConfig, k: int = 3, mode: str = "exact", samples: int = 0, seed: int = 0) -> ExitTimeTable:
    """Exit times over a ladder of radii and the least-squares exponent of ``E[tau]`` in ``r``."""
    radii = list(radii)
    if len(radii) < 2:
        raise ValueError("need at least two radii")
    rows = [exit_time(x, r, cfg, k, mode, samples, seed + i) for i, r in enumerate(radii)]
    slope = np.polyfit(np.log(radii), np.log([row.mean for row in rows]), 1)[0]
    return ExitTimeTable(tuple(float(v) for v in x), rows, float(slope))
