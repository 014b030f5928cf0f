"""Weighted graphs on the pre-carpet.

Three families are built here: the cross graph ``G_n`` (cell centres joined
to edge midpoints), the diagonal graph ``D_n`` (cell centres joined to
corners) and fine-grid discretisations of the weighted Dirichlet form
``int |grad f|^2 d mu_0``.

Every node carries exact integer coordinates ``keys`` in units of
``1/scale``; deduplication of shared midpoints, corners and faces is done on
those integers, never on floats.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import CapExceeded
from .geometry import DEFAULT_LEVEL_CAP, Square, WeightConfig, cells_in_box, unit_cells

ROLE_NAMES = ("X", "Y", "Z", "grid", "face")
ROLE_CENTER, ROLE_MIDPOINT, ROLE_CORNER, ROLE_GRID, ROLE_FACE = range(5)

GRAPH_LEVEL_CAP = 6
GRID_UNKNOWN_CAP = 4_000_000

# integer matrices of the dihedral group acting on (dx, dy)
DIHEDRAL = {
    "id": ((1, 0), (0, 1)),
    "rot90": ((0, -1), (1, 0)),
    "rot180": ((-1, 0), (0, -1)),
    "rot270": ((0, 1), (-1, 0)),
    "flip_x": ((-1, 0), (0, 1)),  # x -> -x
    "flip_y": ((1, 0), (0, -1)),  # y -> -y
    "diag": ((0, 1), (1, 0)),  # swap x and y
    "antidiag": ((0, -1), (-1, 0)),
}


def _encode(keys: np.ndarray) -> np.ndarray:
    k = np.asarray(keys, dtype=np.int64)
    return (k[:, 0] << 32) + (k[:, 1] + (1 << 31))


@dataclass(frozen=True, eq=False)
class CellGraph:
    """Finite weighted graph with exact node coordinates.

    ``edges[e] = (u, v)`` with conductance ``conductance[e] > 0``.  ``mass``
    (when present) is the ``mu_0``-mass attached to each node and is used as
    the reference measure by the random-walk and heat-kernel code.
    """

    keys: np.ndarray
    scale: int
    roles: np.ndarray
    edges: np.ndarray
    conductance: np.ndarray
    mass: np.ndarray | None = None
    level: int | None = None
    region: tuple | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return int(self.keys.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @cached_property
    def coords(self) -> np.ndarray:
        return self.keys / float(self.scale)

    @cached_property
    def _sorted_codes(self):
        codes = _encode(self.keys)
        order = np.argsort(codes)
        return codes[order], order

    def find(self, keys) -> np.ndarray:
        """Node ids for integer key pairs; -1 where no node exists."""
        keys = np.atleast_2d(np.asarray(keys, dtype=np.int64))
        codes, order = self._sorted_codes
        q = _encode(keys)
        pos = np.searchsorted(codes, q)
        pos = np.clip(pos, 0, codes.size - 1)
        hit = codes[pos] == q
        return np.where(hit, order[pos], -1)

    def node_at(self, x, y) -> int:
        """Node at the exact point ``(x, y)`` (rationals allowed)."""
        kx = Fraction(x) * self.scale if not isinstance(x, float) else Fraction(str(x)) * self.scale
        ky = Fraction(y) * self.scale if not isinstance(y, float) else Fraction(str(y)) * self.scale
        if kx.denominator != 1 or ky.denominator != 1:
            return -1
        return int(self.find([[int(kx), int(ky)]])[0])

    def nearest_node(self, x, y, mask: np.ndarray | None = None) -> int:
        d = np.hypot(self.coords[:, 0] - x, self.coords[:, 1] - y)
        if mask is not None:
            d = np.where(mask, d, np.inf)
        return int(np.argmin(d))

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        u, v = self.edges[:, 0], self.edges[:, 1]
        n = self.n_nodes
        a = sp.coo_matrix(
            (np.concatenate([self.conductance, self.conductance]), (np.concatenate([u, v]), np.concatenate([v, u]))),
            shape=(n, n),
        )
        return a.tocsr()

    @cached_property
    def total_conductance(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        return (sp.diags(self.total_conductance) - self.adjacency).tocsr()

    @cached_property
    def degree(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_nodes)

    def energy(self, f: np.ndarray) -> float:
        """Discrete energy ``(1/2) sum_{x,y} g(x,y) (f(x) - f(y))^2``."""
        d = f[self.edges[:, 0]] - f[self.edges[:, 1]]
        return float(np.dot(self.conductance, d * d))

    def symmetry_map(self, op: str, center2) -> np.ndarray:
        """Permutation ``perm`` with ``perm[v]`` = image of node ``v``.

        ``center2`` is twice the centre of the symmetry in key units, so that
        half-integer centres stay integral.  Nodes whose image is missing map
        to -1.
        """
        (a, b), (c, d) = DIHEDRAL[op]
        cx, cy = center2
        X = 2 * self.keys[:, 0] - cx
        Y = 2 * self.keys[:, 1] - cy
        nx = a * X + b * Y + cx
        ny = c * X + d * Y + cy
        if np.any(nx % 2) or np.any(ny % 2):
            raise ValueError("symmetry does not preserve the key lattice")
        return self.find(np.stack([nx // 2, ny // 2], axis=1))

    @cached_property
    def _edge_codes(self):
        a, b = self.edges[:, 0], self.edges[:, 1]
        codes = np.minimum(a, b) * self.n_nodes + np.maximum(a, b)
        order = np.argsort(codes)
        return codes[order], order

    def edge_map(self, perm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Image of every edge under a node permutation.

        Returns ``(idx, sign)``: edge ``e = (a, b)`` maps to edge ``idx[e]``
        whose stored orientation is ``(perm[a], perm[b])`` when ``sign`` is +1
        and reversed when -1.  Raises if some image is not an edge.
        """
        a, b = perm[self.edges[:, 0]], perm[self.edges[:, 1]]
        if np.any(a < 0) or np.any(b < 0):
            raise ValueError("permutation leaves the node set")
        q = np.minimum(a, b) * self.n_nodes + np.maximum(a, b)
        codes, order = self._edge_codes
        pos = np.clip(np.searchsorted(codes, q), 0, codes.size - 1)
        if not np.all(codes[pos] == q):
            raise ValueError("permutation does not preserve the edge set")
        idx = order[pos]
        sign = np.where(self.edges[idx, 0] == a, 1, -1)
        return idx, sign

    def edge_multiset(self, perm: np.ndarray | None = None) -> list:
        """Sorted ``(key_u, key_v, conductance)`` records; used for symmetry checks."""
        u, v = self.edges[:, 0], self.edges[:, 1]
        if perm is not None:
            u, v = perm[u], perm[v]
        ku = [tuple(k) for k in self.keys[u].tolist()]
        kv = [tuple(k) for k in self.keys[v].tolist()]
        recs = [(min(a, b), max(a, b), round(float(c), 12)) for a, b, c in zip(ku, kv, self.conductance)]
        return sorted(recs)

    def header(self) -> dict:
        counts = np.bincount(self.roles, minlength=len(ROLE_NAMES))
        return {
            "level": self.level,
            "region": None if self.region is None else [str(x) for x in self.region],
            "scale": self.scale,
            "n_nodes": self.n_nodes,
            "n_edges": self.n_edges,
            "roles": {ROLE_NAMES[i]: int(c) for i, c in enumerate(counts) if c},
            **self.meta,
        }


def _assemble(node_keys, node_roles, edge_a, edge_b, conductance, **kw) -> CellGraph:
    """Deduplicate nodes by exact key and relabel edge endpoints."""
    all_keys = np.concatenate(node_keys, axis=0)
    all_roles = np.concatenate(node_roles)
    codes = _encode(all_keys)
    uniq, first, inverse = np.unique(codes, return_index=True, return_inverse=True)
    keys = all_keys[first]
    roles = all_roles[first]
    ids_a = np.searchsorted(uniq, _encode(edge_a))
    ids_b = np.searchsorted(uniq, _encode(edge_b))
    edges = np.stack([ids_a, ids_b], axis=1)
    return CellGraph(keys=keys, scale=kw.pop("scale"), roles=roles, edges=edges, conductance=conductance, **kw)


def _check_level(n: int, cap: int):
    if n < 0:
        raise ValueError("level must be non-negative")
    if n > cap:
        raise CapExceeded(f"level {n} exceeds cap {cap}")


_MIDPOINTS = np.array([(1, 0), (2, 1), (1, 2), (0, 1)], dtype=np.int64)
_CORNERS = np.array([(0, 0), (2, 0), (2, 2), (0, 2)], dtype=np.int64)


def _star_graph(n, cfg, spokes, role, cap):
    _check_level(n, cap)
    i, j, e = unit_cells(n, cap=max(cap, DEFAULT_LEVEL_CAP))
    w = cfg.weights_from_exponents(e)
    centers = np.stack([2 * i + 1, 2 * j + 1], axis=1)
    base = np.stack([2 * i, 2 * j], axis=1)
    ends = (base[:, None, :] + spokes[None, :, :]).reshape(-1, 2)
    starts = np.repeat(centers, 4, axis=0)
    return _assemble(
        [centers, ends],
        [np.full(len(centers), ROLE_CENTER, np.int8), np.full(len(ends), role, np.int8)],
        starts,
        ends,
        np.repeat(w, 4),
        scale=2,
        mass=None,
        level=n,
        region=(0, 0, 3**n, 3**n),
        meta={"kind": "G" if role == ROLE_MIDPOINT else "D", "rho": str(cfg.rho)},
    )


def build_cross_graph(n: int, cfg: WeightConfig, cap: int = GRAPH_LEVEL_CAP) -> CellGraph:
    """``G_n``: centres ``X_n`` and edge midpoints ``Y_n`` of the cells of ``F_0^n``.

    Each centre is joined to its four midpoints (distance 1/2) with
    conductance ``mu_0(Q)``.
    """
    return _star_graph(n, cfg, _MIDPOINTS, ROLE_MIDPOINT, cap)


def build_diag_graph(n: int, cfg: WeightConfig, cap: int = GRAPH_LEVEL_CAP) -> CellGraph:
    """``D_n``: centres ``X_n`` and corners ``Z_n``, diagonal spokes of conductance ``mu_0(Q)``."""
    return _star_graph(n, cfg, _CORNERS, ROLE_CORNER, cap)


def region_cells(region, cfg: WeightConfig | None = None):
    """Resolve a region description into ``(I, J, weights)`` unit-cell arrays.

    ``region`` may be an integer level ``n`` (the block ``F_0^n``), a
    :class:`Square`, an integer box ``(x0, y0, x1, y1)``, or explicit arrays
    ``(I, J, weights)``.
    """
    if isinstance(region, (int, np.integer)):
        i, j, e = unit_cells(int(region))
        return i, j, cfg.weights_from_exponents(e)
    if isinstance(region, Square):
        box = (region.x0, region.y0, region.x1, region.y1)
        region = box
    if len(region) == 4 and np.ndim(region[0]) == 0:
        x0, y0, x1, y1 = (Fraction(v) for v in region)
        if any(v.denominator != 1 for v in (x0, y0, x1, y1)):
            raise ValueError("region is not a union of unit cells")
        i, j, e = cells_in_box(int(x0), int(y0), int(x1), int(y1))
        return i, j, cfg.weights_from_exponents(e)
    i, j, w = region
    return np.asarray(i, np.int64), np.asarray(j, np.int64), np.asarray(w, float)


def build_grid_graph(
    region,
    cfg: WeightConfig | None,
    k: int,
    face_nodes: bool = True,
    boundary_faces: bool = True,
    cap: int = GRID_UNKNOWN_CAP,
) -> CellGraph:
    """Cell-centred 5-point discretisation of ``int |grad f|^2 d mu_0`` on a cell union.

    Each unit cell is split into ``k x k`` sub-squares of side ``1/k``; a node
    sits at each sub-square centre with mass ``mu_0(Q)/k^2``.  Neighbours
    inside one unit cell are joined with conductance ``mu_0(Q)`` (in 2-D the
    conductance of a square stencil is mesh independent).  Across an
    interface between unit cells the conductance is the harmonic mean
    ``2 / (1/mu_0(Q_1) + 1/mu_0(Q_2))``; with ``face_nodes`` it is realised by a
    massless node on the interface joined by ``2 mu_0(Q_1)`` and
    ``2 mu_0(Q_2)``, which is the same series conductance and places nodes on
    every lattice line.  With ``boundary_faces`` every exposed face gets a
    dead-end face node (conductance ``2 mu_0(Q)``): it does not change the
    natural (reflecting) boundary condition but gives Dirichlet data a place
    to live.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    I, J, W = region_cells(region, cfg)
    if I.size == 0:
        raise ValueError("empty region")
    if I.size * k * k > cap:
        raise CapExceeded(f"{I.size * k * k} grid unknowns exceed cap {cap}")

    a = np.arange(k, dtype=np.int64)
    A, B = np.meshgrid(a, a, indexing="ij")
    P = (I[:, None] * k + A.ravel()[None, :]).ravel()
    Q = (J[:, None] * k + B.ravel()[None, :]).ravel()
    Wf = np.repeat(W, k * k)
    p0, q0 = P.min(), Q.min()
    nx, ny = P.max() - p0 + 3, Q.max() - q0 + 3
    lookup = np.full((nx, ny), -1, dtype=np.int64)
    lookup[P - p0 + 1, Q - q0 + 1] = np.arange(P.size)
    ncell = P.size

    keys = [np.stack([2 * P + 1, 2 * Q + 1], axis=1)]
    roles = [np.full(ncell, ROLE_GRID, np.int8)]
    masses = [Wf / (k * k)]
    ea, eb, cond = [], [], []
    center_keys = keys[0]

    for dx, dy in ((1, 0), (0, 1)):
        nb = lookup[P - p0 + 1 + dx, Q - q0 + 1 + dy]
        has = nb >= 0
        src = np.nonzero(has)[0]
        dst = nb[has]
        same = (P[src] // k == P[dst] // k) & (Q[src] // k == Q[dst] // k)
        # interior stencil edges of one unit cell
        s, d = src[same], dst[same]
        ea.append(center_keys[s])
        eb.append(center_keys[d])
        cond.append(Wf[s])
        # interface edges between unit cells
        s, d = src[~same], dst[~same]
        if face_nodes:
            fk = np.stack([2 * P[s] + 1 + dx, 2 * Q[s] + 1 + dy], axis=1)
            keys.append(fk)
            roles.append(np.full(len(s), ROLE_FACE, np.int8))
            masses.append(np.zeros(len(s)))
            ea += [center_keys[s], fk]
            eb += [fk, center_keys[d]]
            cond += [2 * Wf[s], 2 * Wf[d]]
        else:
            ea.append(center_keys[s])
            eb.append(center_keys[d])
            cond.append(2.0 / (1.0 / Wf[s] + 1.0 / Wf[d]))

    if boundary_faces:
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nb = lookup[P - p0 + 1 + dx, Q - q0 + 1 + dy]
            s = np.nonzero(nb < 0)[0]
            fk = np.stack([2 * P[s] + 1 + dx, 2 * Q[s] + 1 + dy], axis=1)
            keys.append(fk)
            roles.append(np.full(len(s), ROLE_FACE, np.int8))
            masses.append(np.zeros(len(s)))
            ea.append(center_keys[s])
            eb.append(fk)
            cond.append(2 * Wf[s])

    all_keys = np.concatenate(keys)
    all_mass = np.concatenate(masses)
    codes = _encode(all_keys)
    uniq, first = np.unique(codes, return_index=True)
    graph = _assemble(
        keys,
        roles,
        np.concatenate(ea),
        np.concatenate(eb),
        np.concatenate(cond).astype(float),
        scale=2 * k,
        mass=all_mass[first],
        level=None,
        region=(int(I.min()), int(J.min()), int(I.max()) + 1, int(J.max()) + 1),
        meta={"kind": "grid", "k": k, "face_nodes": face_nodes, "rho": None if cfg is None else str(cfg.rho)},
    )
    return graph


def precarpet_grid(n: int, cfg: WeightConfig, k: int, **kw) -> CellGraph:
    """Grid graph on the block ``F_0^n = [0, 3^n]^2 ∩ pre-carpet``."""
    g = build_grid_graph(n, cfg, k, **kw)
    object.__setattr__(g, "level", n)
    return g


def side_nodes(graph: CellGraph, side: str, extent=None) -> np.ndarray:
    """Node ids lying on one side of the square ``extent = (x0, y0, x1, y1)``.

    ``side`` is one of ``L1`` (bottom), ``L2`` (right), ``L3`` (top), ``L4``
    (left), following the counterclockwise labelling from the lower-left
    corner.  Coordinates are compared exactly on the integer keys.
    """
    x0, y0, x1, y1 = extent if extent is not None else graph.region
    s = graph.scale
    kx, ky = graph.keys[:, 0], graph.keys[:, 1]
    inside_x = (kx >= x0 * s) & (kx <= x1 * s)
    inside_y = (ky >= y0 * s) & (ky <= y1 * s)
    if side == "L1":
        m = (ky == y0 * s) & inside_x
    elif side == "L2":
        m = (kx == x1 * s) & inside_y
    elif side == "L3":
        m = (ky == y1 * s) & inside_x
    elif side == "L4":
        m = (kx == x0 * s) & inside_y
    else:
        raise ValueError(f"unknown side {side!r}")
    return np.nonzero(m)[0]
