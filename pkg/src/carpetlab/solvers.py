"""Linear solvers for pinned graph Laplacians.

The workhorse is a preconditioned conjugate-gradient loop.  The default
preconditioner is Jacobi; for systems above ``AMG_THRESHOLD`` unknowns a
smoothed-aggregation V-cycle from :mod:`pyamg` is used as the preconditioner
inside the same loop.  Dense and sparse-direct solves are provided as
independent oracles and for many right-hand sides at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceError, SingularSystem

DEFAULT_TOL = 1e-10
AMG_THRESHOLD = 150_000


@dataclass(frozen=True)
class SolveInfo:
    iterations: int
    residual: float
    method: str


def pcg(A, b, x0=None, tol=DEFAULT_TOL, maxiter=None, M=None):
    """Preconditioned CG for SPD ``A``; stops at ``||b - Ax|| <= tol ||b||``.

    ``M`` is a callable applying the preconditioner; ``None`` means Jacobi.
    Raises :class:`ConvergenceError` when ``maxiter`` (default
    ``50 sqrt(N)``) is exhausted.
    """
    n = b.shape[0]
    if maxiter is None:
        maxiter = max(50, int(50 * math.sqrt(n)))
    if M is None:
        dinv = 1.0 / A.diagonal()
        M = lambda r: dinv * r  # noqa: E731
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return np.zeros(n), SolveInfo(0, 0.0, "pcg")
    r = b - A @ x
    z = M(r)
    p = z.copy()
    rz = float(r @ z)
    res = np.linalg.norm(r) / bnorm
    it = 0
    while res > tol:
        if it >= maxiter:
            raise ConvergenceError(f"pcg stopped after {it} iterations", bound=res, iterations=it)
        Ap = A @ p
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        it += 1
        # recompute the true residual now and then to avoid drift
        if it % 200 == 0:
            r = b - A @ x
        res = np.linalg.norm(r) / bnorm
        z = M(r)
        rz_new = float(r @ z)
        p *= rz_new / rz
        p += z
        rz = rz_new
    return x, SolveInfo(it, res, "pcg")


def amg_preconditioner(A):
    import pyamg

    # "local" weighting avoids pyamg's randomised spectral-radius estimate,
    # so the hierarchy (and every solve) is bit-for-bit reproducible
    ml = pyamg.smoothed_aggregation_solver(
        A.tocsr(), symmetry="symmetric", max_coarse=500, smooth=("jacobi", {"omega": 4.0 / 3.0, "weighting": "local"})
    )
    return lambda r: ml.solve(r, tol=1e-30, maxiter=1, cycle="V")


def check_pinned(L, pinned: np.ndarray):
    """Raise :class:`SingularSystem` if some component has no pinned node."""
    ncomp, labels = connected_components(L, directed=False)
    has_pin = np.zeros(ncomp, dtype=bool)
    has_pin[labels[pinned]] = True
    if not np.all(has_pin):
        raise SingularSystem(f"{int(np.sum(~has_pin))} component(s) carry no Dirichlet data")


def _split(L, fixed):
    n = L.shape[0]
    free_mask = np.ones(n, dtype=bool)
    free_mask[fixed] = False
    free = np.nonzero(free_mask)[0]
    L = L.tocsr()
    return free, L[free][:, free], L[free][:, fixed]


def dirichlet_solve(L, fixed, values, rhs=None, tol=DEFAULT_TOL, method="auto", maxiter=None, x0=None):
    """Solve ``(L u)(x) = rhs(x)`` off ``fixed`` with ``u = values`` on ``fixed``.

    ``method`` is ``"pcg"`` (Jacobi), ``"amg"`` (CG with a V-cycle
    preconditioner), ``"direct"`` (sparse LU), ``"dense"`` or ``"auto"``.
    ``x0`` is an optional full-length warm start for the iterative methods.
    Returns the full vector ``u`` and a :class:`SolveInfo`; the reported
    residual is relative to the reduced right-hand side.
    """
    fixed = np.asarray(fixed, dtype=np.int64)
    values = np.broadcast_to(np.asarray(values, dtype=float), fixed.shape)
    if np.unique(fixed).size != fixed.size:
        raise ValueError("fixed node list has duplicates")
    check_pinned(L, fixed)
    free, Lff, Lfb = _split(L, fixed)
    b = -(Lfb @ values)
    if rhs is not None:
        b = b + np.asarray(rhs, dtype=float)[free]
    u = np.empty(L.shape[0])
    u[fixed] = values
    if free.size == 0:
        return u, SolveInfo(0, 0.0, "none")
    if method == "auto":
        method = "amg" if free.size > AMG_THRESHOLD else "pcg"
    start = None if x0 is None else np.asarray(x0, dtype=float)[free]
    if method == "pcg":
        x, info = pcg(Lff, b, x0=start, tol=tol, maxiter=maxiter)
    elif method == "amg":
        x, info = pcg(Lff, b, x0=start, tol=tol, maxiter=maxiter, M=amg_preconditioner(Lff))
        info = SolveInfo(info.iterations, info.residual, "amg")
    elif method == "direct":
        x = spla.spsolve(Lff.tocsc(), b)
        info = SolveInfo(0, _relres(Lff, x, b), "direct")
    elif method == "dense":
        x = sla.solve(Lff.toarray(), b, assume_a="pos")
        info = SolveInfo(0, _relres(Lff, x, b), "dense")
    else:
        raise ValueError(f"unknown method {method!r}")
    u[free] = x
    return u, info


def _relres(A, x, b):
    bn = np.linalg.norm(b)
    return float(np.linalg.norm(b - A @ x) / bn) if bn > 0 else 0.0


class DirichletFactor:
    """Sparse LU of the interior block, reusable for many boundary data."""

    def __init__(self, L, fixed):
        fixed = np.asarray(fixed, dtype=np.int64)
        check_pinned(L, fixed)
        self.n = L.shape[0]
        self.fixed = fixed
        self.free, Lff, self._Lfb = _split(L, fixed)
        self._lu = spla.splu(Lff.tocsc()) if self.free.size else None

    def extend(self, data, rhs=None, rows=None) -> np.ndarray:
        """Harmonic extension of ``data`` (shape ``(len(fixed), m)``), optionally only at ``rows``."""
        data = np.asarray(data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        B = -(self._Lfb @ data)
        if rhs is not None:
            B = B + np.asarray(rhs, dtype=float).reshape(self.n, -1)[self.free]
        out = np.empty((self.n, data.shape[1]))
        out[self.fixed] = data
        if self.free.size:
            out[self.free] = self._lu.solve(np.ascontiguousarray(B))
        return out if rows is None else out[rows]


def harmonic_extensions(L, fixed, data, rhs=None):
    """Harmonic extensions of many boundary data columns at once.

    ``data`` has shape ``(len(fixed), m)``; ``rhs`` (optional) has shape
    ``(N, m)``.  Uses one sparse LU factorisation of the interior block.
    Returns an ``(N, m)`` array.
    """
    return DirichletFactor(L, fixed).extend(data, rhs)
