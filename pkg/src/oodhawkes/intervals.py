"""Unions of left-open intervals ``(lo, hi]`` on the real line.

Every windowed indicator in the package (cause active, intervention active,
covariate pattern) is a finite union of such intervals, so time-measure
arithmetic reduces to sorting and merging endpoints.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class IntervalSet:
    """Sorted, disjoint union of intervals ``(lo, hi]``.

    Adjacent intervals that touch (``hi_k == lo_{k+1}``) are merged, so the
    representation of a given set is unique.
    """

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("lo and hi must have the same length")
        if np.any(lo >= hi):
            raise ValueError("every interval needs lo < hi")
        if lo.size > 1 and np.any(lo[1:] <= hi[:-1]):
            raise ValueError("intervals must be sorted, disjoint and non-touching")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    # construction -----------------------------------------------------------

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls(np.empty(0), np.empty(0))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "IntervalSet":
        """Union of arbitrary (possibly overlapping, unsorted) pairs."""
        arr = np.asarray(list(pairs), dtype=float).reshape(-1, 2)
        return cls.union_of(arr[:, 0], arr[:, 1])

    @classmethod
    def union_of(cls, lo: np.ndarray, hi: np.ndarray) -> "IntervalSet":
        lo = np.asarray(lo, dtype=float).reshape(-1)
        hi = np.asarray(hi, dtype=float).reshape(-1)
        keep = hi > lo
        lo, hi = lo[keep], hi[keep]
        if lo.size == 0:
            return cls.empty()
        order = np.argsort(lo, kind="stable")
        lo, hi = lo[order], hi[order]
        # sweep: a new run starts where lo exceeds the running max of hi
        run_hi = np.maximum.accumulate(hi)
        starts = np.empty(lo.size, dtype=bool)
        starts[0] = True
        starts[1:] = lo[1:] > run_hi[:-1]
        idx = np.flatnonzero(starts)
        ends = np.append(idx[1:], lo.size) - 1
        return cls(lo[idx], run_hi[ends])

    # queries ----------------------------------------------------------------

    def __len__(self) -> int:
        return int(self.lo.size)

    def __iter__(self):
        return iter(zip(self.lo.tolist(), self.hi.tolist()))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __repr__(self) -> str:
        body = ", ".join(f"({a!r}, {b!r}]" for a, b in self)
        return f"IntervalSet({{{body}}})"

    @property
    def measure(self) -> float:
        return float(np.sum(self.hi - self.lo))

    def contains(self, t) -> np.ndarray:
        """Vectorised membership test for points ``t``."""
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.lo, t, side="left") - 1
        ok = k >= 0
        kk = np.where(ok, k, 0)
        if self.lo.size == 0:
            return np.zeros(t.shape, dtype=bool)
        return ok & (t <= self.hi[kk])

    def breakpoints(self) -> np.ndarray:
        return np.concatenate([self.lo, self.hi])

    # algebra ----------------------------------------------------------------

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet.union_of(
            np.concatenate([self.lo, other.lo]), np.concatenate([self.hi, other.hi])
        )

    def intersection(self, other: "IntervalSet") -> "IntervalSet":
        if len(self) == 0 or len(other) == 0:
            return IntervalSet.empty()
        # pairwise overlap of two sorted disjoint lists, two-pointer merge
        out_lo, out_hi = [], []
        i = j = 0
        a_lo, a_hi, b_lo, b_hi = self.lo, self.hi, other.lo, other.hi
        while i < a_lo.size and j < b_lo.size:
            lo = max(a_lo[i], b_lo[j])
            hi = min(a_hi[i], b_hi[j])
            if lo < hi:
                out_lo.append(lo)
                out_hi.append(hi)
            if a_hi[i] < b_hi[j]:
                i += 1
            else:
                j += 1
        return IntervalSet.union_of(np.array(out_lo), np.array(out_hi))

    def complement(self, lo: float, hi: float) -> "IntervalSet":
        """Complement within the window ``(lo, hi]``."""
        clipped = self.clip(lo, hi)
        edges_lo = np.concatenate([[lo], clipped.hi])
        edges_hi = np.concatenate([clipped.lo, [hi]])
        return IntervalSet.union_of(edges_lo, edges_hi)

    def difference(self, other: "IntervalSet") -> "IntervalSet":
        if len(self) == 0:
            return self
        lo, hi = float(self.lo[0]), float(self.hi[-1])
        return self.intersection(other.complement(lo, hi))

    def clip(self, lo: float, hi: float) -> "IntervalSet":
        return IntervalSet.union_of(np.clip(self.lo, lo, hi), np.clip(self.hi, lo, hi))

    def subset_of(self, other: "IntervalSet", tol: float = 0.0) -> bool:
        return self.difference(other).measure <= tol
