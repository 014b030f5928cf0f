"""Harnack ratios of harmonic functions on the boxes ``D_m(x)`` of the pre-carpet.

A function harmonic inside ``D_m(x)`` away from the absorbing part of its
boundary is a mixture of harmonic measures of boundary atoms, so the largest
``sup / inf`` ratio over the central box ``G_m(x)`` among the atoms bounds the
ratio of every non-negative harmonic function there.

The absorbing boundary is the part of ``∂D_m(x)`` shared with another square
of the pre-carpet; the rest of the boundary (the first-quadrant axes, faces
against holes) reflects.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .geometry import WeightConfig, in_precarpet
from .network import ROLE_FACE, CellGraph, build_grid_graph
from .solvers import DirichletFactor
from .walks import BoundaryPartition, perimeter_partition


@dataclass(frozen=True, eq=False)
class HarnackDomain:
    graph: CellGraph
    center: tuple
    m: int
    absorbing: np.ndarray
    inner: np.ndarray  # nodes of G_m(x)


def harnack_domain(center, m: int, cfg: WeightConfig, k: int = 3) -> HarnackDomain:
    """Grid graph of ``D_m`` centred at the ``3^m``-lattice point ``center``."""
    s = 3**m
    cx, cy = (Fraction(c) for c in center)
    if (cx / s).denominator != 1 or (cy / s).denominator != 1:
        raise ValueError("centre must be a 3^m lattice point")
    cx, cy = int(cx), int(cy)
    box = (cx - s, cy - s, cx + s, cy + s)
    g = build_grid_graph(box, cfg, k)
    sc = g.scale
    kx, ky = g.keys[:, 0], g.keys[:, 1]
    x0, y0, x1, y1 = (v * sc for v in box)
    face = g.roles == ROLE_FACE
    # unit cell just outside the box across each boundary face
    ox = np.where(kx == x0, box[0] - 1, np.where(kx == x1, box[2], -1))
    oy = np.where(ky == y0, box[1] - 1, np.where(ky == y1, box[3], -1))
    on_lr = face & ((kx == x0) | (kx == x1))
    on_bt = face & ((ky == y0) | (ky == y1))
    col = np.floor_divide(kx, sc)
    row = np.floor_divide(ky, sc)
    outside_lr = in_precarpet(ox, row) & on_lr
    outside_bt = in_precarpet(col, oy) & on_bt
    absorbing = np.nonzero(outside_lr | outside_bt)[0]
    if absorbing.size == 0:
        raise ValueError("box has no absorbing boundary")
    h = Fraction(2, 3) * s
    inner = np.nonzero(
        (np.abs(g.keys[:, 0] - cx * sc) <= h * sc) & (np.abs(g.keys[:, 1] - cy * sc) <= h * sc)
    )[0]
    if inner.size == 0:
        raise ValueError("degenerate domain: no node in the central box")
    return HarnackDomain(g, (cx, cy), m, absorbing, inner)


def boundary_atoms(dom: HarnackDomain, kind: str = "nodes") -> BoundaryPartition:
    """Atoms of the absorbing boundary: single nodes, or the 16 half-side segments."""
    if kind == "nodes":
        n = dom.absorbing.size
        return BoundaryPartition(dom.absorbing, np.eye(n), tuple(f"node{v}" for v in dom.absorbing))
    if kind == "segments":
        s = 3**dom.m
        cx, cy = dom.center
        part = perimeter_partition(dom.graph, (cx - s, cy - s, cx + s, cy + s), s / 2, (cx + s, cy))
        keep = np.isin(part.nodes, dom.absorbing)
        w = part.weights[keep]
        used = w.sum(axis=0) > 0
        labels = tuple(l for l, u in zip(part.labels, used) if u)
        return BoundaryPartition(part.nodes[keep], w[:, used], labels)
    raise ValueError(f"unknown atom kind {kind!r}")


def _atom_data(dom: HarnackDomain, atoms: BoundaryPartition, cols) -> np.ndarray:
    fixed = dom.absorbing
    pos = np.full(dom.graph.n_nodes, -1)
    pos[atoms.nodes] = np.arange(atoms.nodes.size)
    data = np.zeros((fixed.size, len(cols)))
    hit = pos[fixed] >= 0
    data[hit] = atoms.weights[pos[fixed[hit]]][:, cols]
    return data


def harmonic_measure_atoms(dom: HarnackDomain, kind: str = "nodes") -> tuple[np.ndarray, BoundaryPartition]:
    """One harmonic function per atom; columns of the returned ``(N, atoms)`` array."""
    atoms = boundary_atoms(dom, kind)
    data = _atom_data(dom, atoms, np.arange(atoms.weights.shape[1]))
    return DirichletFactor(dom.graph.laplacian, dom.absorbing).extend(data), atoms


def atom_ratios(dom: HarnackDomain, kind: str = "nodes", chunk: int = 128) -> tuple[np.ndarray, BoundaryPartition]:
    """``sup / inf`` over ``G_m`` of every atom's harmonic measure, in column chunks."""
    atoms = boundary_atoms(dom, kind)
    fac = DirichletFactor(dom.graph.laplacian, dom.absorbing)
    n = atoms.weights.shape[1]
    out = np.empty(n)
    for lo in range(0, n, chunk):
        cols = np.arange(lo, min(n, lo + chunk))
        vals = fac.extend(_atom_data(dom, atoms, cols), rows=dom.inner)
        out[cols] = ratio_over(vals, np.arange(dom.inner.size))
    return out, atoms


@dataclass(frozen=True)
class HarnackReport:
    m: int
    center: tuple
    k: int
    atoms: str
    n_atoms: int
    theta: float
    worst_atom: str
    flagged: list

    def to_dict(self) -> dict:
        return dict(self.__dict__, center=list(self.center))


def ratio_over(values: np.ndarray, nodes: np.ndarray, zero_tol: float = 1e-14) -> np.ndarray:
    """``sup / inf`` over ``nodes`` for each column; ``inf`` where the minimum vanishes."""
    v = values[nodes]
    hi, lo = v.max(axis=0), v.min(axis=0)
    return np.where(lo > zero_tol * np.maximum(hi, 1e-300), hi / np.where(lo > 0, lo, 1.0), np.inf)


def harnack_report(center, m: int, cfg: WeightConfig, k: int = 3, atoms: str = "nodes") -> HarnackReport:
    dom = harnack_domain(center, m, cfg, k)
    r, part = atom_ratios(dom, atoms)
    flagged = [part.labels[i] for i in np.nonzero(~np.isfinite(r))[0]]
    finite = np.where(np.isfinite(r), r, -np.inf)
    j = int(np.argmax(finite))
    theta = float(finite[j]) if np.isfinite(finite[j]) else float("inf")
    return HarnackReport(m, dom.center, k, atoms, len(part.labels), theta, part.labels[j], flagged)


def default_centers(m: int) -> list:
    """Two self-similar centres: a junction of four ``3^m`` squares and one next to a hole."""
    s = 3**m
    return [(3 * s, 3 * s), (s, s)]


def harnack_constant(ms, cfg: WeightConfig, centers=None, k: int = 3, atoms: str = "nodes") -> list[HarnackReport]:
    """Reports for every ``m`` and centre (``centers`` maps ``m`` to a list, or ``None`` for defaults)."""
    out = []
    for m in ms:
        cs = default_centers(m) if centers is None else centers[m]
        for c in cs:
            out.append(harnack_report(c, m, cfg, k, atoms))
    return out
