"""Finite unions of closed intervals on the energy axis.

Carrier for band spectra and positive-Lyapunov regions.  All operations are
exact endpoint arithmetic; single points [a, a] are allowed and carry zero
measure.  Set difference returns the closure of the pointwise difference so
results stay in the closed-interval algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

DEFAULT_MERGE_TOL = 1e-12


@dataclass(frozen=True)
class IntervalSet:
    intervals: tuple[tuple[float, float], ...]

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    @property
    def measure(self) -> float:
        return math.fsum(b - a for a, b in self.intervals)

    @property
    def hull(self) -> tuple[float, float]:
        if self.is_empty:
            raise ValueError("empty set has no hull")
        return self.intervals[0][0], self.intervals[-1][1]

    def __len__(self) -> int:
        return len(self.intervals)

    def contains(self, x: float) -> bool:
        return any(a <= x <= b for a, b in self.intervals)

    def dist(self, x: float) -> float:
        """Distance from the point x to the set."""
        if self.is_empty:
            raise ValueError("distance to the empty set is undefined")
        best = math.inf
        for a, b in self.intervals:
            if a <= x <= b:
                return 0.0
            best = min(best, abs(x - a), abs(x - b))
        return best


EMPTY = IntervalSet(intervals=())


def normalize(raw: Iterable[Sequence[float]],
              merge_tol: float = DEFAULT_MERGE_TOL) -> IntervalSet:
    """Sort, validate and merge intervals whose gap is at most merge_tol."""
    if merge_tol < 0:
        raise ValueError("merge_tol must be >= 0")
    items = []
    for pair in raw:
        a, b = float(pair[0]), float(pair[1])
        if math.isnan(a) or math.isnan(b):
            raise ValueError("NaN interval endpoint")
        if a > b:
            raise ValueError(f"interval [{a}, {b}] has negative length")
        items.append((a, b))
    items.sort()
    merged: list[list[float]] = []
    for a, b in items:
        if merged and a <= merged[-1][1] + merge_tol:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return IntervalSet(intervals=tuple((a, b) for a, b in merged))


def measure(s: IntervalSet) -> float:
    return s.measure


def fatten(s: IntervalSet, delta: float) -> IntervalSet:
    """Grow every interval by delta on both sides and re-merge."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    return normalize([(a - delta, b + delta) for a, b in s.intervals],
                     merge_tol=0.0)


def one_sided(a: IntervalSet, b: IntervalSet) -> float:
    """sup over points of a of the distance to b, from endpoints exactly.

    The distance function x -> dist(x, b) is piecewise linear; on each
    interval of a its maximum sits at an endpoint or at a gap midpoint of b.
    """
    if a.is_empty or b.is_empty:
        raise ValueError("one_sided distance needs nonempty sets")
    gap_mids = [(u[1] + v[0]) / 2.0
                for u, v in zip(b.intervals[:-1], b.intervals[1:])]
    best = 0.0
    for lo, hi in a.intervals:
        candidates = [lo, hi]
        candidates.extend(m for m in gap_mids if lo < m < hi)
        for x in candidates:
            d = b.dist(x)
            if d > best:
                best = d
    return best


def hausdorff(a: IntervalSet, b: IntervalSet) -> float:
    """Hausdorff distance between two nonempty interval sets."""
    return max(one_sided(a, b), one_sided(b, a))


def union(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    return normalize(list(a.intervals) + list(b.intervals), merge_tol=0.0)


def intersection(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    out = []
    i = j = 0
    ia, ib = a.intervals, b.intervals
    while i < len(ia) and j < len(ib):
        lo = max(ia[i][0], ib[j][0])
        hi = min(ia[i][1], ib[j][1])
        if lo <= hi:
            out.append((lo, hi))
        if ia[i][1] < ib[j][1]:
            i += 1
        else:
            j += 1
    return normalize(out, merge_tol=0.0)


def difference(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    """Closure of the set difference a \\ b."""
    out = []
    for lo, hi in a.intervals:
        cur = lo
        for u, v in b.intervals:
            if v < cur or u > hi:
                continue
            if u > cur:
                out.append((cur, u))
            cur = max(cur, v)
            if cur >= hi:
                break
        if cur < hi:
            out.append((cur, hi))
    return normalize(out, merge_tol=0.0)


def combine(a: IntervalSet, b: IntervalSet, which: str) -> IntervalSet:
    ops = {"union": union, "intersection": intersection,
           "difference": difference}
    if which not in ops:
        raise ValueError(f"unknown set operation {which!r}")
    return ops[which](a, b)


def setwise_gap(a: IntervalSet, b: IntervalSet) -> float:
    """Measure of the symmetric difference; 0 iff the sets agree a.e."""
    return difference(a, b).measure + difference(b, a).measure


def to_pairs(s: IntervalSet) -> list[list[float]]:
    """JSON-ready [a, b] pairs."""
    return [[a, b] for a, b in s.intervals]


def from_pairs(pairs: Iterable[Sequence[float]]) -> IntervalSet:
    return normalize(pairs, merge_tol=0.0)
