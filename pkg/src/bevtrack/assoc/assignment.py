"""Min-cost bipartite assignment with forbidden (+inf) pairs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Assignment:
    matches: list[tuple[int, int]] = field(default_factory=list)
    unmatched_rows: list[int] = field(default_factory=list)
    unmatched_cols: list[int] = field(default_factory=list)

    # names used by the tracker: rows are tracklets, columns detections
    @property
    def unmatched_tracklets(self) -> list[int]:
        return self.unmatched_rows

    @property
    def unmatched_detections(self) -> list[int]:
        return self.unmatched_cols


def _hungarian_rows(a: np.ndarray) -> list[int]:
    """Shortest augmenting path Hungarian method for an n x m matrix with n <= m.

    Returns the column assigned to every row. O(n^2 m).
    """
    n, m = a.shape
    inf = math.inf
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)  # p[j]: row (1-based) owning column j, 0 if free
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = a[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    cols = [0] * n
    for j in range(1, m + 1):
        if p[j]:
            cols[p[j] - 1] = j - 1
    return cols


def hungarian(cost) -> Assignment:
    """Maximum-cardinality, minimum-total-cost matching over the finite entries of ``cost``.

    ``+inf`` entries are never matched. Results are deterministic for a given
    matrix. Matches are returned sorted by row.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        cost = cost.reshape(len(cost), -1) if cost.size else np.zeros((len(cost), 0))
    n, m = cost.shape
    if np.isnan(cost).any() or np.isneginf(cost).any():
        raise ValueError("cost matrix must not contain NaN or -inf")
    finite = np.isfinite(cost)
    if n == 0 or m == 0 or not finite.any():
        return Assignment([], list(range(n)), list(range(m)))

    lo, hi = cost[finite].min(), cost[finite].max()
    # one forbidden pair must outweigh any spread of finite totals
    big = min(n, m) * (hi - lo) + 1.0
    work = np.where(finite, cost - lo, big)
    transposed = n > m
    if transposed:
        work = work.T
    cols = _hungarian_rows(work)
    pairs = [(c, r) if transposed else (r, c) for r, c in enumerate(cols)]
    matches = sorted((r, c) for r, c in pairs if finite[r, c])
    rows_used = {r for r, _ in matches}
    cols_used = {c for _, c in matches}
    return Assignment(
        matches,
        [r for r in range(n) if r not in rows_used],
        [c for c in range(m) if c not in cols_used],
    )


def total_cost(cost, assignment: Assignment) -> float:
    cost = np.asarray(cost, dtype=float)
    return sum(float(cost[r, c]) for r, c in assignment.matches)
