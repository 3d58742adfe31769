"""
Finite unions of intervals and rectangles.

Control regions and observation sets are represented as finite unions of
closed intervals in 1D (``MeasurableSet1D``) and of axis-aligned rectangles in
2D (``RectSet``). Measures are exact. The fat Cantor generator produces closed
nowhere-dense sets of positive measure at any finite depth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Interval", "MeasurableSet1D", "RectSet", "FatCantorSpec",
    "InfeasibleError", "measure", "fat_cantor", "greedy_nodes",
    "best_subinterval", "partition_cells", "ray_measure",
]

_CONTAIN_TOL = 1e-12


class InfeasibleError(ValueError):
    """Raised when a greedy node placement cannot fit the requested points."""


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"interval endpoints must be finite: [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise ValueError(f"interval has lo > hi: [{self.lo}, {self.hi}]")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, other: "Interval", tol: float = 0.0) -> bool:
        return other.lo >= self.lo - tol and other.hi <= self.hi + tol


@dataclass(frozen=True)
class MeasurableSet1D:
    """Sorted, pairwise disjoint closed intervals inside an ambient interval.

    Use :meth:`from_pairs` to build from arbitrary (possibly overlapping)
    pairs; the constructor itself only validates.
    """

    intervals: tuple[Interval, ...]
    ambient: Interval = Interval(0.0, 1.0)
    _lo: np.ndarray = field(init=False, repr=False, compare=False)
    _hi: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ivs = tuple(self.intervals)
        object.__setattr__(self, "intervals", ivs)
        lo = np.array([iv.lo for iv in ivs], dtype=float)
        hi = np.array([iv.hi for iv in ivs], dtype=float)
        if len(ivs) > 1 and np.any(lo[1:] <= hi[:-1]):
            raise ValueError("intervals must be sorted and pairwise disjoint")
        if len(ivs) and (lo[0] < self.ambient.lo - _CONTAIN_TOL
                         or hi[-1] > self.ambient.hi + _CONTAIN_TOL):
            raise ValueError(f"set is not contained in ambient {self.ambient}")
        object.__setattr__(self, "_lo", lo)
        object.__setattr__(self, "_hi", hi)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]], ambient=(0.0, 1.0)) -> "MeasurableSet1D":
        """Build from ``[lo, hi]`` pairs, merging overlaps and touching ends."""
        amb = ambient if isinstance(ambient, Interval) else Interval(*map(float, ambient))
        arr = np.asarray(list(pairs), dtype=float).reshape(-1, 2)
        return cls._from_arrays(arr[:, 0], arr[:, 1], amb)

    @classmethod
    def _from_arrays(cls, lo, hi, ambient: Interval) -> "MeasurableSet1D":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if np.any(lo > hi):
            bad = int(np.argmax(lo > hi))
            raise ValueError(f"interval has lo > hi: [{lo[bad]}, {hi[bad]}]")
        keep = hi > lo
        lo, hi = lo[keep], hi[keep]
        order = np.argsort(lo, kind="stable")
        lo, hi = lo[order], hi[order]
        merged: list[Interval] = []
        if lo.size:
            # a new run starts wherever lo exceeds every previous hi
            run_hi = np.maximum.accumulate(hi)
            starts = np.flatnonzero(np.r_[True, lo[1:] > run_hi[:-1]])
            ends = np.r_[starts[1:] - 1, lo.size - 1]
            merged = [Interval(float(lo[s]), float(run_hi[e])) for s, e in zip(starts, ends)]
        return cls(tuple(merged), ambient)

    @classmethod
    def empty(cls, ambient=(0.0, 1.0)) -> "MeasurableSet1D":
        return cls.from_pairs([], ambient)

    # -- views -------------------------------------------------------------
    @property
    def lows(self) -> np.ndarray:
        return self._lo

    @property
    def highs(self) -> np.ndarray:
        return self._hi

    def __len__(self):
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def as_pairs(self) -> list[list[float]]:
        return [[iv.lo, iv.hi] for iv in self.intervals]

    @property
    def measure(self) -> float:
        return float(np.sum(self._hi - self._lo))

    @property
    def inf(self) -> float:
        if not self.intervals:
            raise ValueError("empty set has no infimum")
        return float(self._lo[0])

    @property
    def sup(self) -> float:
        if not self.intervals:
            raise ValueError("empty set has no supremum")
        return float(self._hi[-1])

    def contains(self, x) -> np.ndarray:
        """Vectorized membership test for the closed set."""
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(self._hi, x, side="left")
        inside = k < len(self._hi)
        kk = np.minimum(k, max(len(self._hi) - 1, 0))
        if not len(self._hi):
            return np.zeros(x.shape, dtype=bool)
        return inside & (self._lo[kk] <= x)

    def cumulative(self, x) -> np.ndarray:
        """``|E ∩ (-inf, x]|`` evaluated elementwise."""
        x = np.asarray(x, dtype=float)
        if not len(self._lo):
            return np.zeros(x.shape)
        lengths = np.concatenate([[0.0], np.cumsum(self._hi - self._lo)])
        k = np.searchsorted(self._lo, x, side="right")  # intervals starting at or before x
        partial = np.where(k > 0, np.minimum(x, self._hi[np.maximum(k - 1, 0)])
                           - self._lo[np.maximum(k - 1, 0)], 0.0)
        return lengths[np.maximum(k - 1, 0)] * (k > 0) + np.clip(partial, 0.0, None)

    def measure_in(self, a, b) -> np.ndarray:
        """``|E ∩ [a, b]|`` elementwise."""
        return self.cumulative(b) - self.cumulative(a)

    def restrict(self, a: float, b: float) -> "MeasurableSet1D":
        lo = np.maximum(self._lo, a)
        hi = np.minimum(self._hi, b)
        keep = hi > lo
        return MeasurableSet1D._from_arrays(lo[keep], hi[keep], Interval(min(a, b), max(a, b)))

    def affine(self, shift: float, scale: float, ambient=None) -> "MeasurableSet1D":
        """Image under ``x -> (x + shift) * scale`` with ``scale > 0``."""
        if scale <= 0:
            raise ValueError("scale must be positive")
        if ambient is None:
            ambient = Interval((self.ambient.lo + shift) * scale, (self.ambient.hi + shift) * scale)
        elif not isinstance(ambient, Interval):
            ambient = Interval(*ambient)
        lo = np.clip((self._lo + shift) * scale, ambient.lo, ambient.hi)
        hi = np.clip((self._hi + shift) * scale, ambient.lo, ambient.hi)
        return MeasurableSet1D._from_arrays(lo, hi, ambient)

    def union(self, other: "MeasurableSet1D") -> "MeasurableSet1D":
        amb = Interval(min(self.ambient.lo, other.ambient.lo), max(self.ambient.hi, other.ambient.hi))
        return MeasurableSet1D._from_arrays(np.r_[self._lo, other._lo], np.r_[self._hi, other._hi], amb)

    def issubset(self, other: "MeasurableSet1D", tol: float = 1e-12) -> bool:
        return all(float(other.measure_in(iv.lo, iv.hi)) >= iv.length - tol for iv in self.intervals)


def measure(s) -> float:
    """Lebesgue measure of a ``MeasurableSet1D`` or ``RectSet``."""
    return s.measure


# -- fat Cantor sets --------------------------------------------------------

@dataclass(frozen=True)
class FatCantorSpec:
    """Symmetric removal construction.

    At step ``k = 1..depth`` the open middle part of relative length
    ``removal_ratio**k`` is removed from every remaining interval, so the
    measure after ``depth`` steps is ``prod_k (1 - removal_ratio**k)`` times
    the ambient length.
    """

    depth: int
    removal_ratio: float

    def __post_init__(self):
        if int(self.depth) != self.depth or self.depth < 0:
            raise ValueError("depth must be a nonnegative integer")
        if not (0.0 < self.removal_ratio < 1.0 / 3.0):
            raise ValueError("removal_ratio must lie in (0, 1/3)")

    def closed_form_measure(self, length: float = 1.0) -> float:
        r = self.removal_ratio
        return length * math.prod(1.0 - r ** k for k in range(1, self.depth + 1))

    def build(self, ambient=(0.0, 1.0)) -> MeasurableSet1D:
        return fat_cantor(self.depth, self.removal_ratio, ambient)


def fat_cantor(depth: int, ratio: float, ambient=(0.0, 1.0)) -> MeasurableSet1D:
    """Fat Cantor set of the given depth inside ``ambient`` (see ``FatCantorSpec``)."""
    FatCantorSpec(depth, ratio)  # validation
    a, b = map(float, ambient)
    lo = np.array([a])
    hi = np.array([b])
    for k in range(1, depth + 1):
        length = hi - lo
        gap = ratio ** k * length
        mid = 0.5 * (lo + hi)
        left_hi = mid - 0.5 * gap
        right_lo = mid + 0.5 * gap
        lo = np.column_stack([lo, right_lo]).ravel()
        hi = np.column_stack([left_hi, hi]).ravel()
    return MeasurableSet1D._from_arrays(lo, hi, Interval(a, b))


# -- steps from the smallness proofs ---------------------------------------

def greedy_nodes(E: MeasurableSet1D, n: int, upper: float = 0.2) -> np.ndarray:
    """Place ``n + 1`` increasing points of the closure of ``E``.

    ``x_0 = inf E`` and ``x_i = inf(E ∩ [x_{i-1} + |E|/(n+1), upper])``, so
    consecutive gaps are at least ``|E|/(n+1)``.

    Raises
    ------
    InfeasibleError
        If some ``E ∩ [x_{i-1} + gap, upper]`` is empty.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    m = E.measure
    if m <= 0:
        raise ValueError("E must have positive measure")
    if E.sup > upper + _CONTAIN_TOL:
        raise ValueError(f"E must lie below {upper}")
    gap = m / (n + 1)
    lo, hi = E.lows, E.highs
    nodes = np.empty(n + 1)
    nodes[0] = lo[0]
    for i in range(1, n + 1):
        target = nodes[i - 1] + gap
        k = int(np.searchsorted(hi, target, side="left"))
        if k == len(hi):
            raise InfeasibleError(f"cannot place node {i} of {n}: E exhausted")
        x = max(lo[k], target)
        if x > upper + _CONTAIN_TOL:
            raise InfeasibleError(f"cannot place node {i} of {n}: beyond {upper}")
        nodes[i] = x
    return nodes


def partition_cells(rho: float, span=(0.0, 1.0)) -> np.ndarray:
    """Cells of length ``2*rho/5`` covering ``span``.

    There are ``ceil(5/(2 rho))`` cells (scaled to the span length); the last
    one is shifted left so that it ends at the right endpoint, which keeps
    every cell center inside the span.
    """
    a, b = span
    L = b - a
    width = 2.0 * rho / 5.0
    count = math.ceil(L / width - 1e-12)
    starts = a + width * np.arange(count)
    starts[-1] = max(a, b - width)
    return np.column_stack([starts, starts + width])


def best_subinterval(E: MeasurableSet1D, rho: float) -> tuple[Interval, float]:
    """Cell of :func:`partition_cells` maximizing ``|E ∩ I|``.

    Ties go to the leftmost cell. The returned measure is at least
    ``|E| / ceil(5/(2 rho))``.
    """
    if not (0.0 < rho <= 1.0):
        raise ValueError("rho must lie in (0, 1]")
    cells = partition_cells(rho)
    masses = E.measure_in(cells[:, 0], cells[:, 1])
    k = int(np.argmax(masses))
    return Interval(float(cells[k, 0]), float(cells[k, 1])), float(masses[k])


# -- 2D rectangles ----------------------------------------------------------

@dataclass(frozen=True)
class RectSet:
    """Finite union of closed axis-aligned rectangles ``[x0,x1]×[y0,y1]``.

    Rectangles may overlap; ``measure`` is that of the union.
    """

    rects: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rects, dtype=float).reshape(-1, 4)
        if np.any(r[:, 0] > r[:, 1]) or np.any(r[:, 2] > r[:, 3]):
            raise ValueError("rectangle with negative side length")
        r = r[(r[:, 1] > r[:, 0]) & (r[:, 3] > r[:, 2])]
        r.setflags(write=False)
        object.__setattr__(self, "rects", r)

    @classmethod
    def from_list(cls, rects) -> "RectSet":
        return cls(np.asarray(rects, dtype=float))

    @classmethod
    def product(cls, xset: MeasurableSet1D, y: tuple[float, float]) -> "RectSet":
        """``xset × [y0, y1]``."""
        return cls(np.array([[iv.lo, iv.hi, y[0], y[1]] for iv in xset.intervals]).reshape(-1, 4))

    def __len__(self):
        return len(self.rects)

    @property
    def measure(self) -> float:
        r = self.rects
        if not len(r):
            return 0.0
        xs = np.unique(np.r_[r[:, 0], r[:, 1]])
        total = 0.0
        for xa, xb in zip(xs[:-1], xs[1:]):
            xm = 0.5 * (xa + xb)
            act = r[(r[:, 0] <= xm) & (r[:, 1] >= xm)]
            if len(act):
                ys = MeasurableSet1D._from_arrays(act[:, 2], act[:, 3], Interval(act[:, 2].min(), act[:, 3].max()))
                total += (xb - xa) * ys.measure
        return total

    def bounding_radius(self, center) -> float:
        """Largest distance from ``center`` to a point of the set."""
        r = self.rects
        cx, cy = center
        dx = np.maximum(np.abs(r[:, 0] - cx), np.abs(r[:, 1] - cx))
        dy = np.maximum(np.abs(r[:, 2] - cy), np.abs(r[:, 3] - cy))
        return float(np.max(np.hypot(dx, dy))) if len(r) else 0.0

    def contains(self, pts) -> np.ndarray:
        p = np.asarray(pts, dtype=float).reshape(-1, 2)
        r = self.rects
        inside = ((p[:, None, 0] >= r[None, :, 0]) & (p[:, None, 0] <= r[None, :, 1])
                  & (p[:, None, 1] >= r[None, :, 2]) & (p[:, None, 1] <= r[None, :, 3]))
        return inside.any(axis=1)


def _ray_intervals(rects: np.ndarray, x, dirs: np.ndarray, length: float):
    """Parameter intervals ``t ∈ [0, 1]`` with ``x + t*length*z`` in each rectangle.

    Returns arrays ``(lo, hi)`` of shape ``(ndirs, nrects)``; empty traces
    have ``hi <= lo``.
    """
    x = np.asarray(x, dtype=float)
    d = np.atleast_2d(dirs) * length
    t_lo = np.zeros((d.shape[0], rects.shape[0]))
    t_hi = np.ones_like(t_lo)
    for axis in range(2):
        a = rects[None, :, 2 * axis] - x[axis]
        b = rects[None, :, 2 * axis + 1] - x[axis]
        v = d[:, axis:axis + 1]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            ta = a / v
            tb = b / v
        lo_ax = np.where(v == 0, np.where((a <= 0) & (b >= 0), -np.inf, np.inf), np.minimum(ta, tb))
        hi_ax = np.where(v == 0, np.where((a <= 0) & (b >= 0), np.inf, -np.inf), np.maximum(ta, tb))
        t_lo = np.maximum(t_lo, lo_ax)
        t_hi = np.minimum(t_hi, hi_ax)
    return t_lo, t_hi


def _union_lengths(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Row-wise measure of the union of intervals ``[lo, hi]`` (empty if hi<=lo)."""
    empty = ~(hi > lo)
    lo = np.where(empty, 0.0, lo)
    hi = np.where(empty, 0.0, hi)
    order = np.argsort(lo, axis=1)
    lo = np.take_along_axis(lo, order, axis=1)
    hi = np.take_along_axis(hi, order, axis=1)
    reach = np.maximum.accumulate(hi, axis=1)
    prev = np.concatenate([np.full((lo.shape[0], 1), -np.inf), reach[:, :-1]], axis=1)
    return np.sum(np.clip(hi - np.maximum(lo, prev), 0.0, None), axis=1)


def ray_measure(E: RectSet, x, z, length: float = 1.0) -> tuple[float, MeasurableSet1D]:
    """Measure of ``{t ∈ [0,1] : x + t*length*z ∈ E}`` and the trace set itself."""
    z = np.asarray(z, dtype=float)
    if not np.isclose(np.linalg.norm(z), 1.0, rtol=0, atol=1e-12):
        raise ValueError("direction must be a unit vector")
    lo, hi = _ray_intervals(E.rects, x, z[None, :], length)
    keep = hi[0] > lo[0]
    trace = MeasurableSet1D._from_arrays(lo[0][keep], hi[0][keep], Interval(0.0, 1.0))
    return trace.measure, trace


def ray_measures(E: RectSet, x, dirs: np.ndarray, length: float = 1.0) -> np.ndarray:
    """Trace measures for many unit directions at once (rows of ``dirs``)."""
    lo, hi = _ray_intervals(E.rects, x, np.asarray(dirs, dtype=float), length)
    return _union_lengths(lo, hi)
