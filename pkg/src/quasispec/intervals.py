"""Finite unions of closed intervals on the real line."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class IntervalSet:
    """Sorted, pairwise disjoint closed intervals stored as an (n, 2) array."""

    bounds: np.ndarray

    def __init__(self, intervals: Iterable = (), merge_gap: float = 0.0):
        arr = np.asarray(list(intervals) if not isinstance(intervals, np.ndarray) else intervals,
                         dtype=float).reshape(-1, 2)
        if arr.size and (arr[:, 1] < arr[:, 0]).any():
            raise ValueError("interval with right end below left end")
        arr = arr[np.argsort(arr[:, 0], kind="stable")]
        merged: list[list[float]] = []
        for a, b in arr:
            if merged and a <= merged[-1][1] + merge_gap:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        out = np.array(merged, dtype=float).reshape(-1, 2)
        out.setflags(write=False)
        object.__setattr__(self, "bounds", out)

    def __len__(self) -> int:
        return self.bounds.shape[0]

    def __iter__(self):
        return iter(map(tuple, self.bounds.tolist()))

    def __eq__(self, other) -> bool:
        return isinstance(other, IntervalSet) and np.array_equal(self.bounds, other.bounds)

    def __hash__(self):
        return hash(self.bounds.tobytes())

    @property
    def measure(self) -> float:
        return float(np.sum(self.bounds[:, 1] - self.bounds[:, 0]))

    @property
    def lengths(self) -> np.ndarray:
        return self.bounds[:, 1] - self.bounds[:, 0]

    @property
    def hull(self) -> tuple[float, float]:
        if not len(self):
            raise ValueError("empty interval set")
        return float(self.bounds[0, 0]), float(self.bounds[-1, 1])

    def gaps(self) -> "IntervalSet":
        """Bounded open gaps between consecutive intervals, returned as closed intervals."""
        if len(self) < 2:
            return IntervalSet()
        return IntervalSet(np.column_stack([self.bounds[:-1, 1], self.bounds[1:, 0]]))

    def contains(self, x) -> np.ndarray | bool:
        x_arr = np.asarray(x, dtype=float)
        i = np.searchsorted(self.bounds[:, 0], x_arr, side="right") - 1
        ok = i >= 0
        ic = np.clip(i, 0, max(len(self) - 1, 0))
        res = ok & (len(self) > 0) & (x_arr <= (self.bounds[ic, 1] if len(self) else -np.inf))
        return bool(res) if np.ndim(x) == 0 else res

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(np.vstack([self.bounds, other.bounds]))

    def intersection(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        i = j = 0
        A, B = self.bounds, other.bounds
        while i < len(A) and j < len(B):
            lo = max(A[i, 0], B[j, 0])
            hi = min(A[i, 1], B[j, 1])
            if lo <= hi:
                out.append((lo, hi))
            if A[i, 1] < B[j, 1]:
                i += 1
            else:
                j += 1
        return IntervalSet(out)

    def symmetric_difference_measure(self, other: "IntervalSet") -> float:
        return self.measure + other.measure - 2 * self.intersection(other).measure

    def widen(self, eps: float) -> "IntervalSet":
        return IntervalSet(self.bounds + np.array([-eps, eps]))

    def to_list(self) -> list[list[float]]:
        return self.bounds.tolist()
