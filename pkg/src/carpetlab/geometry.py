"""Word-addressed geometry of the Sierpinski carpet and its pre-carpet.

Cells are addressed two ways.  A *word* ``w = (w_1, ..., w_n)`` over the
alphabet ``{1..8}`` names the carpet cell ``F_w = Phi_w([0,1]^2)``.  A pair of
non-negative integers ``(i, j)`` names the unit square ``[i,i+1]x[j,j+1]`` of
the pre-carpet; inside ``[0,3^n]^2`` the two are related by
``3^n * Phi_u([0,1]^2) = [i,i+1]x[j,j+1]`` where the base-3 digits of ``i`` and
``j`` (most significant first) are the offsets of ``u_1, ..., u_n``.

The weight of a cell is the product of per-symbol weights: ``rho`` for the
even symbols (edge-midpoint cells) and ``1`` for the odd ones (corner cells).
In terms of digits, a digit pair contributes ``rho`` exactly when one of the
two digits equals 1, so the weight of a unit cell is ``rho ** e(i, j)`` with
``e`` the number of such digit positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np

from .errors import CapExceeded, ConvergenceError

# symbol -> (x digit, y digit) of the level-1 cell, counterclockwise from (0,0)
SYMBOL_OFFSETS = {
    1: (0, 0),
    2: (1, 0),
    3: (2, 0),
    4: (2, 1),
    5: (2, 2),
    6: (1, 2),
    7: (0, 2),
    8: (0, 1),
}
OFFSET_SYMBOLS = {v: k for k, v in SYMBOL_OFFSETS.items()}

DEFAULT_LEVEL_CAP = 8

Word = tuple


def as_word(symbols: Iterable[int]) -> tuple[int, ...]:
    word = tuple(int(s) for s in symbols)
    for s in word:
        if s < 1 or s > 8:
            raise ValueError(f"word symbol {s} outside 1..8")
    return word


def parse_rho(value) -> Fraction | float:
    """Accept ``"p/q"``, decimal strings, ints, Fractions or floats."""
    if isinstance(value, (Fraction, int)):
        rho = Fraction(value)
    elif isinstance(value, float):
        rho = value
    else:
        text = str(value).strip()
        try:
            rho = Fraction(text)
        except ValueError as exc:
            raise ValueError(f"cannot parse rho from {value!r}") from exc
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {value!r}")
    return rho


@dataclass(frozen=True)
class WeightConfig:
    """The weight parameter ``rho`` and the quantities derived from it."""

    rho: Fraction | float = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "rho", parse_rho(self.rho))

    def symbol_weight(self, symbol: int):
        return self.rho if symbol % 2 == 0 else 1

    @property
    def symbol_weights(self) -> tuple:
        return tuple(self.symbol_weight(i) for i in range(1, 9))

    @property
    def mass_normalizer(self):
        """Sum of the eight symbol weights, ``4 + 4 rho``."""
        return 4 + 4 * self.rho

    @property
    def rho_float(self) -> float:
        return float(self.rho)

    @property
    def alpha(self) -> float:
        """``log(4 + 4 rho) / log 3``; equals the carpet dimension at rho = 1."""
        return math.log(float(self.mass_normalizer)) / math.log(3)

    def weights_from_exponents(self, exponents: np.ndarray) -> np.ndarray:
        return np.power(self.rho_float, np.asarray(exponents, dtype=float))

    def to_dict(self) -> dict:
        return {"rho": str(self.rho)}


@dataclass(frozen=True)
class Square:
    """Axis-parallel closed square ``[x0, x0+side] x [y0, y0+side]``."""

    x0: Fraction
    y0: Fraction
    side: Fraction

    def __post_init__(self):
        for name in ("x0", "y0", "side"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if self.side <= 0:
            raise ValueError("side must be positive")
        if _log3_exact(self.side) is None:
            raise ValueError(f"side {self.side} is not an integer power of 3")

    @property
    def x1(self) -> Fraction:
        return self.x0 + self.side

    @property
    def y1(self) -> Fraction:
        return self.y0 + self.side

    @property
    def center(self) -> tuple[Fraction, Fraction]:
        return (self.x0 + self.side / 2, self.y0 + self.side / 2)

    def contains(self, p) -> bool:
        x, y = p
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def as_tuple(self) -> tuple[float, float, float]:
        return (float(self.x0), float(self.y0), float(self.side))


def _log3_exact(value: Fraction) -> int | None:
    value = Fraction(value)
    e = 0
    while value > 1 and value.denominator == 1 and value.numerator % 3 == 0:
        value /= 3
        e += 1
    while value < 1 and value.numerator == 1 and value.denominator % 3 == 0:
        value *= 3
        e -= 1
    return e if value == 1 else None


def _coerce_point(p):
    x, y = p
    if isinstance(x, Rational) and isinstance(y, Rational):
        return Fraction(x), Fraction(y), True
    return float(x), float(y), False


def apply_similarity(word: Sequence[int], p) -> tuple:
    """Return ``Phi_w(p) = Phi_{w_1} o ... o Phi_{w_n}(p)``.

    Exact (Fraction) when ``p`` has rational coordinates, float otherwise.
    """
    word = as_word(word)
    x, y, exact = _coerce_point(p)
    third = Fraction(1, 3) if exact else 1.0 / 3.0
    for s in reversed(word):
        dx, dy = SYMBOL_OFFSETS[s]
        x = x * third + dx * third
        y = y * third + dy * third
    return (x, y)


def cell_square(word: Sequence[int]) -> Square:
    word = as_word(word)
    x0, y0 = apply_similarity(word, (Fraction(0), Fraction(0)))
    return Square(x0, y0, Fraction(1, 3 ** len(word)))


def word_weight(word: Sequence[int], cfg: WeightConfig):
    """``rho_w``, the product of the per-symbol weights."""
    out = 1
    for s in as_word(word):
        out = out * cfg.symbol_weight(s)
    return out


def cell_measure(word: Sequence[int], cfg: WeightConfig):
    """Self-similar mass ``mu(F_w) = rho_w / (4 + 4 rho)^|w|``.

    Exact (a Fraction) when rho is rational.
    """
    word = as_word(word)
    return word_weight(word, cfg) / cfg.mass_normalizer ** len(word)


def word_to_cell(word: Sequence[int]) -> tuple[int, int]:
    """Unit cell ``(i, j)`` of ``F_0^n`` addressed by ``word`` (n = len(word))."""
    i = j = 0
    for s in as_word(word):
        dx, dy = SYMBOL_OFFSETS[s]
        i = 3 * i + dx
        j = 3 * j + dy
    return i, j


def cell_to_word(i: int, j: int, n: int) -> tuple[int, ...]:
    """Inverse of :func:`word_to_cell`; raises if the cell is not in ``F_0^n``."""
    if not (0 <= i < 3**n and 0 <= j < 3**n):
        raise ValueError(f"cell ({i},{j}) outside [0,3^{n})^2")
    out = []
    for _ in range(n):
        pair = (i % 3, j % 3)
        if pair == (1, 1):
            raise ValueError(f"cell lies in a removed square")
        out.append(OFFSET_SYMBOLS[pair])
        i //= 3
        j //= 3
    return tuple(reversed(out))


def in_precarpet(i, j) -> np.ndarray:
    """Vectorised membership test for unit cells ``(i, j)`` of the pre-carpet.

    Cells with a negative coordinate are outside (the pre-carpet lives in the
    closed first quadrant).
    """
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    ok = (i >= 0) & (j >= 0)
    a = np.where(ok, i, 0)
    b = np.where(ok, j, 0)
    while np.any((a > 0) | (b > 0)):
        ok &= ~((a % 3 == 1) & (b % 3 == 1))
        a = a // 3
        b = b // 3
    return ok


def weight_exponent(i, j) -> np.ndarray:
    """Number of base-3 digit positions where exactly one of ``i, j`` is 1."""
    a = np.asarray(i, dtype=np.int64).copy()
    b = np.asarray(j, dtype=np.int64).copy()
    e = np.zeros(np.broadcast(a, b).shape, dtype=np.int64)
    while np.any((a > 0) | (b > 0)):
        e += (a % 3 == 1) ^ (b % 3 == 1)
        a //= 3
        b //= 3
    return e


def unit_cells(n: int, cap: int = DEFAULT_LEVEL_CAP) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Arrays ``(i, j, exponent)`` of the ``8^n`` unit cells of ``F_0^n``.

    Cells come out in lexicographic word order (``u_1`` most significant).
    """
    if n < 0:
        raise ValueError("level must be non-negative")
    if n > cap:
        raise CapExceeded(f"level {n} exceeds cap {cap}")
    offs = np.array([SYMBOL_OFFSETS[s] for s in range(1, 9)], dtype=np.int64)
    exps = np.array([0, 1, 0, 1, 0, 1, 0, 1], dtype=np.int64)
    i = np.zeros(1, dtype=np.int64)
    j = np.zeros(1, dtype=np.int64)
    e = np.zeros(1, dtype=np.int64)
    for level in range(n):
        scale = 3 ** (n - 1 - level)
        i = (i[:, None] + scale * offs[None, :, 0]).ravel()
        j = (j[:, None] + scale * offs[None, :, 1]).ravel()
        e = (e[:, None] + exps[None, :]).ravel()
    return i, j, e


def precarpet_cells(n: int, cfg: WeightConfig, cap: int = DEFAULT_LEVEL_CAP) -> list[tuple[Square, object]]:
    """All unit squares of ``F_0^n`` paired with ``mu_0(Q) = rho_u``.

    Weights are exact when rho is rational.  The list is in word order.
    """
    if n < 1:
        raise ValueError("level must be >= 1")
    i, j, e = unit_cells(n, cap)
    rho = cfg.rho
    return [(Square(a, b, 1), rho ** int(k)) for a, b, k in zip(i.tolist(), j.tolist(), e.tolist())]


def cells_in_box(x0: int, y0: int, x1: int, y1: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pre-carpet unit cells inside the integer box ``[x0,x1] x [y0,y1]``."""
    xs = np.arange(max(x0, 0), x1, dtype=np.int64)
    ys = np.arange(max(y0, 0), y1, dtype=np.int64)
    if xs.size == 0 or ys.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    I, J = np.meshgrid(xs, ys, indexing="ij")
    I = I.ravel()
    J = J.ravel()
    keep = in_precarpet(I, J)
    I = I[keep]
    J = J[keep]
    return I, J, weight_exponent(I, J)


def neighborhood(x, n: int, kind: str = "Q"):
    """Square neighbourhoods of a point.

    ``Q``: the side-``3^n`` lattice square containing ``x`` (half-open rounding
    down).  ``D``: the 2x2 block of side-``3^n`` squares whose centre is the
    ``3^n``-lattice point nearest to ``x`` (half-open rounding).  ``G``: the
    central part of ``D`` within sup-distance ``(2/3) 3^n`` of its centre.

    Returns a :class:`Square` for ``Q``; for ``D`` and ``G`` a tuple
    ``(x_lo, y_lo, x_hi, y_hi)`` of Fractions.
    """
    px, py = (Fraction(c) if isinstance(c, Rational) else Fraction(str(c)) for c in x)
    s = Fraction(3) ** n
    kind = kind.upper()
    if kind == "Q":
        i = math.floor(px / s)
        j = math.floor(py / s)
        return Square(i * s, j * s, s)
    i = math.floor(px / s + Fraction(1, 2))
    j = math.floor(py / s + Fraction(1, 2))
    if kind == "D":
        return ((i - 1) * s, (j - 1) * s, (i + 1) * s, (j + 1) * s)
    if kind == "G":
        h = Fraction(2, 3) * s
        return (i * s - h, j * s - h, i * s + h, j * s + h)
    raise ValueError(f"unknown neighbourhood kind {kind!r}")


def d_center(x, n: int) -> tuple[Fraction, Fraction]:
    lo = neighborhood(x, n, "D")
    return ((lo[0] + lo[2]) / 2, (lo[1] + lo[3]) / 2)


def _square_distances(px, py, x0, y0, side, norm):
    dx_min = np.maximum(np.maximum(x0 - px, px - (x0 + side)), 0.0)
    dy_min = np.maximum(np.maximum(y0 - py, py - (y0 + side)), 0.0)
    dx_max = np.maximum(np.abs(px - x0), np.abs(px - (x0 + side)))
    dy_max = np.maximum(np.abs(py - y0), np.abs(py - (y0 + side)))
    if norm == "inf":
        return np.maximum(dx_min, dy_min), np.maximum(dx_max, dy_max)
    return np.hypot(dx_min, dy_min), np.hypot(dx_max, dy_max)


def ball_measure(
    x,
    r: float,
    cfg: WeightConfig,
    tol: float = 1e-6,
    norm: str = "euclid",
    depth_cap: int = 12,
) -> float:
    """``mu(B(x, r) ∩ F)`` for the self-similar measure on the carpet.

    Descends the word tree level by level; cells inside the ball are counted,
    cells outside dropped, straddling cells refined until their total mass is
    below ``tol`` times the accumulated mass.  Returns the midpoint of the
    final enclosure.  Raises :class:`ConvergenceError` (with the enclosure
    half-width as ``bound``) when ``depth_cap`` is reached first.
    """
    if r <= 0 or tol <= 0:
        raise ValueError("radius and tolerance must be positive")
    if norm not in ("euclid", "inf"):
        raise ValueError(f"unknown norm {norm!r}")
    px, py = float(x[0]), float(x[1])
    norm_c = float(cfg.mass_normalizer)
    ratios = np.array([float(cfg.symbol_weight(s)) / norm_c for s in range(1, 9)])
    offs = np.array([SYMBOL_OFFSETS[s] for s in range(1, 9)], dtype=float)

    x0 = np.zeros(1)
    y0 = np.zeros(1)
    mass = np.ones(1)
    side = 1.0
    inside = 0.0
    for depth in range(depth_cap + 1):
        dmin, dmax = _square_distances(px, py, x0, y0, side, norm)
        # snap rounding noise so lattice-aligned spheres resolve exactly
        full = dmax <= r * (1 + 1e-12)
        straddle = ~full & (dmin < r * (1 - 1e-12))
        inside += float(mass[full].sum())
        x0, y0, mass = x0[straddle], y0[straddle], mass[straddle]
        pending = float(mass.sum())
        if pending == 0.0 or (inside > 0 and pending <= tol * inside):
            return inside + pending / 2
        if depth == depth_cap:
            break
        side /= 3.0
        x0 = (x0[:, None] + side * offs[None, :, 0]).ravel()
        y0 = (y0[:, None] + side * offs[None, :, 1]).ravel()
        mass = (mass[:, None] * ratios[None, :]).ravel()
    raise ConvergenceError(
        f"ball_measure did not reach tol={tol} by depth {depth_cap}",
        bound=pending / 2,
        iterations=depth_cap,
    )


def precarpet_ball_measure(
    x, r: float, cfg: WeightConfig, norm: str = "inf", resolution: int = 32
) -> float:
    """``mu_0(B(x, r))`` on the pre-carpet (weights times Lebesgue measure).

    Exact for sup-norm balls; Euclidean balls use a ``resolution^2`` midpoint
    rule on the unit cells that straddle the circle.
    """
    px, py = float(x[0]), float(x[1])
    lo_x, lo_y = math.floor(px - r), math.floor(py - r)
    hi_x, hi_y = math.ceil(px + r) + 1, math.ceil(py + r) + 1
    I, J, E = cells_in_box(lo_x, lo_y, hi_x, hi_y)
    if I.size == 0:
        return 0.0
    w = cfg.weights_from_exponents(E)
    if norm == "inf":
        ox = np.clip(np.minimum(I + 1, px + r) - np.maximum(I, px - r), 0, None)
        oy = np.clip(np.minimum(J + 1, py + r) - np.maximum(J, py - r), 0, None)
        return float(np.sum(w * ox * oy))
    dmin, dmax = _square_distances(px, py, I.astype(float), J.astype(float), 1.0, "euclid")
    total = float(np.sum(w[dmax <= r]))
    part = (dmin < r) & (dmax > r)
    if np.any(part):
        t = (np.arange(resolution) + 0.5) / resolution
        gx, gy = np.meshgrid(t, t, indexing="ij")
        for a, b, wt in zip(I[part], J[part], w[part]):
            frac = np.mean(np.hypot(a + gx - px, b + gy - py) < r)
            total += wt * frac
    return total
