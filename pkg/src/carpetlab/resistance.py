"""Effective resistance by the potential and flow principles.

Convention: the source set ``B0`` carries potential 0, the sink ``B1``
potential 1, and the optimal current is ``J(x, y) = R g(x, y) (u(y) - u(x))``,
so that one unit of current leaves ``B0`` and enters ``B1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import WeightConfig, precarpet_ball_measure
from .network import CellGraph, build_grid_graph, side_nodes
from .solvers import DEFAULT_TOL, dirichlet_solve

DUALITY_FACTOR = 4.0
RESIDUAL_FLOOR = 1e-15


@dataclass(frozen=True)
class BoundarySpec:
    source: np.ndarray
    sink: np.ndarray

    def __post_init__(self):
        s = np.unique(np.asarray(self.source, dtype=np.int64))
        t = np.unique(np.asarray(self.sink, dtype=np.int64))
        if s.size == 0 or t.size == 0:
            raise ValueError("boundary sets must be nonempty")
        if np.intersect1d(s, t).size:
            raise ValueError("source and sink overlap")
        object.__setattr__(self, "source", s)
        object.__setattr__(self, "sink", t)


def side_boundary(graph: CellGraph, source: str = "L4", sink: str = "L2", extent=None) -> BoundarySpec:
    """Boundary pair made of the nodes on two sides of the region's square."""
    return BoundarySpec(side_nodes(graph, source, extent), side_nodes(graph, sink, extent))


@dataclass(frozen=True, eq=False)
class Flow:
    """Edge current; ``current[e]`` flows from ``edges[e, 0]`` to ``edges[e, 1]``."""

    graph: CellGraph
    current: np.ndarray
    source: np.ndarray | None = None
    sink: np.ndarray | None = None

    def between(self, x: int, y: int) -> float:
        e = self.graph.edges
        fwd = np.nonzero((e[:, 0] == x) & (e[:, 1] == y))[0]
        bwd = np.nonzero((e[:, 0] == y) & (e[:, 1] == x))[0]
        return float(self.current[fwd].sum() - self.current[bwd].sum())

    def divergence(self) -> np.ndarray:
        """Net current leaving each node."""
        n = self.graph.n_nodes
        e = self.graph.edges
        return np.bincount(e[:, 0], self.current, n) - np.bincount(e[:, 1], self.current, n)

    def flux(self, nodes) -> float:
        """Net current leaving the node set."""
        return float(self.divergence()[np.asarray(nodes, dtype=np.int64)].sum())

    def energy(self) -> float:
        return float(np.sum(self.current**2 / self.graph.conductance))

    def scaled(self, c: float) -> "Flow":
        return Flow(self.graph, c * self.current, self.source, self.sink)

    def __add__(self, other: "Flow") -> "Flow":
        return Flow(self.graph, self.current + other.current)

    def max_interior_divergence(self, exclude) -> float:
        d = self.divergence()
        mask = np.ones(d.size, dtype=bool)
        mask[np.asarray(exclude, dtype=np.int64)] = False
        return float(np.max(np.abs(d[mask]), initial=0.0))


@dataclass(frozen=True, eq=False)
class PotentialSolution:
    potential: np.ndarray
    energy: float
    resistance: float
    residual: float
    iterations: int
    method: str
    boundary: BoundarySpec
    duality_gap: float = float("nan")
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "R": self.resistance,
            "energy": self.energy,
            "residual": self.residual,
            "iterations": self.iterations,
            "method": self.method,
            "duality_gap": self.duality_gap,
        }


def _raw_flow(graph: CellGraph, u: np.ndarray, R: float) -> np.ndarray:
    e = graph.edges
    return R * graph.conductance * (u[e[:, 1]] - u[e[:, 0]])


def effective_resistance(
    graph: CellGraph, boundary: BoundarySpec, tol: float = DEFAULT_TOL, method: str = "auto"
) -> PotentialSolution:
    """Minimise the energy over potentials 0 on the source and 1 on the sink.

    The resistance is the reciprocal of the minimal energy.  The
    flux-normalised optimal current is built as a by-product and the gap
    ``|R - E(J)|`` between the two variational principles is recorded.
    """
    fixed = np.concatenate([boundary.source, boundary.sink])
    vals = np.concatenate([np.zeros(boundary.source.size), np.ones(boundary.sink.size)])
    u = None
    its = 0
    target = tol
    while True:
        u, info = dirichlet_solve(graph.laplacian, fixed, vals, tol=target, method=method, x0=u)
        its += info.iterations
        energy = graph.energy(u)
        if energy <= 0:
            raise ValueError("source and sink are not connected")
        R = 1.0 / energy
        flow = Flow(graph, _raw_flow(graph, u, R), boundary.source, boundary.sink)
        unit = flow.scaled(1.0 / flow.flux(boundary.source))
        gap = abs(R - unit.energy())
        # the gap is quadratic-ish in the residual; tighten until it certifies tol
        if gap <= DUALITY_FACTOR * tol * R or target <= RESIDUAL_FLOOR or info.method in ("direct", "dense"):
            break
        target = max(target / 100, RESIDUAL_FLOOR)
    return PotentialSolution(u, energy, R, info.residual, its, info.method, boundary, gap)


def potential_to_flow(graph: CellGraph, sol: PotentialSolution) -> Flow:
    """Current ``R g grad u`` of a solved potential; unit flux up to the solver residual."""
    b = sol.boundary
    return Flow(graph, _raw_flow(graph, sol.potential, sol.resistance), b.source, b.sink)


def unit_flow(graph: CellGraph, sol: PotentialSolution) -> Flow:
    """The optimal current rescaled so that exactly one unit leaves the source."""
    f = potential_to_flow(graph, sol)
    return f.scaled(1.0 / f.flux(sol.boundary.source))


def res(A, omega, graph: CellGraph, tol: float = DEFAULT_TOL, method: str = "auto") -> float:
    """``res(A, Omega)``: inverse of the least energy of ``f = 1`` on ``A``, ``0`` off ``Omega``."""
    A = np.unique(np.asarray(A, dtype=np.int64))
    inside = np.zeros(graph.n_nodes, dtype=bool)
    inside[np.asarray(omega, dtype=np.int64)] = True
    if A.size == 0:
        raise ValueError("A is empty")
    if not np.all(inside[A]):
        raise ValueError("A must lie inside Omega")
    outside = np.nonzero(~inside)[0]
    if outside.size == 0:
        raise ValueError("Omega is the whole graph; nothing to pin at 0")
    sol = effective_resistance(graph, BoundarySpec(outside, A), tol=tol, method=method)
    return sol.resistance


def sup_distance(graph: CellGraph, x0) -> np.ndarray:
    c = graph.coords
    return np.maximum(np.abs(c[:, 0] - float(x0[0])), np.abs(c[:, 1] - float(x0[1])))


@dataclass(frozen=True)
class AnnulusReport:
    x0: tuple
    n: int
    k: int
    resistance: float
    comparison: float | None
    ratio: float | None


def annulus_resistance(
    x0, n: int, k: int, cfg: WeightConfig, mesh: int = 3, R_n: float | None = None, tol: float = DEFAULT_TOL
) -> AnnulusReport:
    """``res(B_inf(x0, k 3^n), B_inf(x0, (k+1) 3^n))`` on the grid graph.

    When ``R_n`` is supplied the report carries the comparison value
    ``R_n (4 + 4 rho)^n / mu_0(B_inf(x0, 3^n))`` and the ratio to it.
    """
    s = 3**n
    x, y = int(x0[0]), int(x0[1])
    outer = (k + 1) * s
    box = (max(x - outer, 0), max(y - outer, 0), x + outer, y + outer)
    graph = build_grid_graph(box, cfg, mesh)
    d = sup_distance(graph, (x, y))
    A = np.nonzero(d <= k * s + 1e-12)[0]
    omega = np.nonzero(d < outer - 1e-12)[0]
    value = res(A, omega, graph, tol=tol)
    comparison = ratio = None
    if R_n is not None:
        comparison = R_n * float(cfg.mass_normalizer) ** n / precarpet_ball_measure((x, y), s, cfg, norm="inf")
        ratio = value / comparison
    return AnnulusReport((x, y), n, k, value, comparison, ratio)


def interface_fluxes(graph: CellGraph, u: np.ndarray) -> np.ndarray:
    """Weighted one-sided normal derivatives at every interior face node.

    Returns rows ``(mu_1 d_1, mu_2 d_2)`` where ``d_j`` is the difference
    quotient of ``u`` from the cell centre in ``Q_j`` to the face, taken in
    the direction of the outward normal of ``Q_j``.  Flux continuity across
    the interface is ``mu_1 d_1 = -mu_2 d_2``.
    """
    from .network import ROLE_FACE

    faces = np.nonzero((graph.roles == ROLE_FACE) & (graph.degree == 2))[0]
    e = graph.edges
    half = 0.5 / (graph.scale / 2)  # distance from a sub-cell centre to its face
    rows = np.zeros((faces.size, 2))
    pos = np.full(graph.n_nodes, -1)
    pos[faces] = np.arange(faces.size)
    slot = np.zeros(faces.size, dtype=int)
    for col_face, col_cell in ((0, 1), (1, 0)):
        hit = pos[e[:, col_face]] >= 0
        for ei in np.nonzero(hit)[0]:
            f = pos[e[ei, col_face]]
            c = e[ei, col_cell]
            mu = graph.conductance[ei] / 2
            rows[f, slot[f]] = mu * (u[e[ei, col_face]] - u[c]) / half
            slot[f] += 1
    return rows
