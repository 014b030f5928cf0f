"""Flows and potentials assembled from rotated copies of one optimal solution.

The block ``F_0^n`` is cut into four triangles ``T_1..T_4`` by its
diagonals (``T_i`` is adjacent to side ``L_i``; sides are numbered
counterclockwise from the bottom).  Restricting rotated copies of the optimal
left-to-right current to these triangles gives unit flows between any two
sides, which combine into a flow with prescribed net inflow through each
side (the crosswire construction).  The same pieces, applied to the optimal
potential, extend corner data to a potential on the whole block.

Edges are assigned to triangles by their midpoints.  With an odd number of
sub-cells per unit cell no midpoint lies on a diagonal, so every edge has a
single owner; nodes on a diagonal are shared by two triangles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import WeightConfig
from .network import CellGraph, build_grid_graph, side_nodes
from .resistance import Flow, PotentialSolution, effective_resistance, side_boundary, unit_flow
from .solvers import DEFAULT_TOL

SIDES = ("L1", "L2", "L3", "L4")


def _cyc(i: int) -> int:
    return (i - 1) % 4 + 1


@dataclass(frozen=True, eq=False)
class RotationBasis:
    """Rotated optimal potentials and unit flows of one block ``F_0^n``."""

    graph: CellGraph
    solution: PotentialSolution
    resistance: float
    potentials: dict  # i -> u rotated by (i-1) quarter turns
    flows: dict  # (i, j) -> current array of the unit flow from L_i to L_j
    edge_triangle: np.ndarray
    node_triangles: np.ndarray  # (N, 4) bool membership of the closed triangles
    side_sets: dict

    def flow(self, i: int, j: int) -> Flow:
        return Flow(self.graph, self.flows[(i, j)])

    def triangle_energy(self, current: np.ndarray, i: int) -> float:
        m = self.edge_triangle == i
        return float(np.sum(current[m] ** 2 / self.graph.conductance[m]))


def _rotate_current(graph: CellGraph, perm: np.ndarray, current: np.ndarray) -> np.ndarray:
    idx, sign = graph.edge_map(perm)
    out = np.zeros_like(current)
    out[idx] = sign * current
    return out


def _triangle_of(dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    lab = np.zeros(dx.shape, dtype=np.int8)
    lab[dy < -np.abs(dx)] = 1
    lab[dx > np.abs(dy)] = 2
    lab[dy > np.abs(dx)] = 3
    lab[dx < -np.abs(dy)] = 4
    return lab


def rotation_basis(n: int, cfg: WeightConfig, k: int = 3, tol: float = DEFAULT_TOL) -> RotationBasis:
    """Solve the left-to-right problem on the grid of ``F_0^n`` and rotate it.

    ``k`` must be odd so that no edge midpoint falls on a diagonal.
    """
    if k % 2 == 0:
        raise ValueError("k must be odd")
    graph = build_grid_graph(n, cfg, k)
    sol = effective_resistance(graph, side_boundary(graph), tol=tol)
    c2 = 2 * (3**n) * k  # twice the block centre, in key units
    rot = graph.symmetry_map("rot90", (c2, c2))
    if np.any(rot < 0):
        raise ValueError("grid is not invariant under the quarter turn")

    # potentials: u^{i+1}(rot v) = u^i(v)
    pots = {1: sol.potential}
    for i in (2, 3, 4):
        nxt = np.empty_like(sol.potential)
        nxt[rot] = pots[i - 1]
        pots[i] = nxt

    # opposite-side unit flows, then the adjacent ones from the triangle pieces
    base = {}
    base[(4, 2)] = unit_flow(graph, sol).current
    order = [(4, 2), (1, 3), (2, 4), (3, 1)]
    for a, b in zip(order, order[1:]):
        base[b] = _rotate_current(graph, rot, base[a])
    flows = dict(base)
    for (i, j), cur in base.items():
        flows[(j, i)] = -cur

    e = graph.edges
    mid = (graph.keys[e[:, 0]] + graph.keys[e[:, 1]]).astype(np.int64) - c2
    edge_tri = _triangle_of(mid[:, 0], mid[:, 1])
    if np.any(edge_tri == 0):
        raise ValueError("an edge midpoint lies on a diagonal")

    def piece(i, j, tri):
        return np.where(edge_tri == tri, flows[(i, j)], 0.0)

    U = {i: piece(_cyc(i + 2), i, i) for i in range(1, 5)}
    V = {i: piece(_cyc(i + 1), _cyc(i - 1), i) for i in range(1, 5)}
    adj = U[1] - U[4] + V[2] + V[3]  # from L4 to L1
    for step in range(4):
        src, dst = _cyc(4 + step), _cyc(1 + step)
        flows[(src, dst)] = adj
        flows[(dst, src)] = -adj
        adj = _rotate_current(graph, rot, adj)

    K = 2 * graph.keys.astype(np.int64) - c2
    dx, dy = K[:, 0], K[:, 1]
    node_tri = np.stack(
        [dy <= -np.abs(dx), dx >= np.abs(dy), dy >= np.abs(dx), dx <= -np.abs(dy)], axis=1
    )
    sides = {i + 1: side_nodes(graph, s) for i, s in enumerate(SIDES)}
    return RotationBasis(graph, sol, sol.resistance, pots, flows, edge_tri, node_tri, sides)


def side_inflows(flow: Flow, basis: RotationBasis) -> np.ndarray:
    """Net current entering the block through each side ``L_1..L_4``."""
    div = flow.divergence()
    return np.array([div[basis.side_sets[i]].sum() for i in range(1, 5)])


def crosswire_compose(H, basis: RotationBasis) -> Flow:
    """Flow with net inflow ``H_i`` through side ``L_i``.

    ``J = sum_{i != j} h^{-1} H_i^+ H_j^- I^{ij}`` with ``h = (1/2) sum |H_i|``
    and ``I^{ij}`` the unit flow from ``L_i`` to ``L_j``.  Its energy is at
    most ``R (1/2) sum H_i^2``.  All-zero ``H`` gives the zero flow.
    """
    H = np.asarray(H, dtype=float)
    if H.shape != (4,):
        raise ValueError("H must have four entries")
    scale = max(1.0, float(np.max(np.abs(H))))
    if abs(H.sum()) > 1e-12 * scale:
        raise ValueError("H must sum to zero")
    h = 0.5 * np.abs(H).sum()
    cur = np.zeros(basis.graph.n_edges)
    if h == 0.0:
        return Flow(basis.graph, cur)
    pos = np.maximum(H, 0.0)
    neg = np.maximum(-H, 0.0)
    for i in range(1, 5):
        for j in range(1, 5):
            if i != j and pos[i - 1] > 0 and neg[j - 1] > 0:
                cur = cur + (pos[i - 1] * neg[j - 1] / h) * basis.flows[(i, j)]
    return Flow(basis.graph, cur)


def crosswire_energy_bound(H, resistance: float) -> float:
    H = np.asarray(H, dtype=float)
    return resistance * 0.5 * float(np.sum(H * H))


@dataclass(frozen=True, eq=False)
class ComposedPotential:
    values: np.ndarray
    energy: float
    bound: float
    seam_mismatch: float


def compose_potential(z, basis: RotationBasis, center: float | None = None, center_tol: float = 1e-12) -> ComposedPotential:
    """Extend corner values ``z_1..z_4`` (at ``C_1..C_4``) to the whole block.

    On ``T_i`` the value is ``z_i + (2 zbar - z_i - z_{i+1}) v_i + (z_{i+1} - z_i) w_i``
    with ``v_i``, ``w_i`` the optimal potential turned ``i`` and ``i-1``
    quarter turns.  ``center``, if given, must equal the corner mean.  Nodes
    on a diagonal get the average of the two formulas; their largest
    disagreement is reported as ``seam_mismatch``.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (4,):
        raise ValueError("need four corner values")
    zbar = float(z.mean())
    if center is not None and abs(center - zbar) > center_tol * max(1.0, abs(zbar)):
        raise ValueError("centre value must be the mean of the corner values")
    N = basis.graph.n_nodes
    total = np.zeros(N)
    count = np.zeros(N)
    lo = np.full(N, np.inf)
    hi = np.full(N, -np.inf)
    for i in range(1, 5):
        zi, zn = z[i - 1], z[_cyc(i + 1) - 1]
        v = basis.potentials[_cyc(i + 1)]
        w = basis.potentials[i]
        vals = zi + (2 * zbar - zi - zn) * v + (zn - zi) * w
        m = basis.node_triangles[:, i - 1]
        total[m] += vals[m]
        count[m] += 1
        lo[m] = np.minimum(lo[m], vals[m])
        hi[m] = np.maximum(hi[m], vals[m])
    f = total / count
    seam = float(np.max(hi - lo))
    bound = 2.0 / basis.resistance * float(np.sum((z - zbar) ** 2))
    return ComposedPotential(f, basis.graph.energy(f), bound, seam)
