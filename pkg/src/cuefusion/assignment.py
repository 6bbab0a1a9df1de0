"""Minimum-cost bipartite matching (Kuhn-Munkres) with post-solve rejection.

The solver pads the cost matrix to a square one, runs the shortest
augmenting path form of the Hungarian method with dual potentials, and then
walks the tight-edge subgraph to pick, among all optimal matchings, the one
that is lexicographically smallest in row order. Ties are therefore broken
the same way on every run and on every platform.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np


@dataclass
class AssignmentResult:
    matches: list[tuple[int, int]] = field(default_factory=list)
    unmatched_rows: list[int] = field(default_factory=list)
    unmatched_cols: list[int] = field(default_factory=list)


def _pad_cost(real: np.ndarray, n: int, reject_above: float) -> float:
    """A cost that no combination of real entries can beat."""
    top = float(np.max(np.abs(real))) if real.size else 0.0
    if math.isfinite(reject_above):
        top = max(top, abs(reject_above))
    return (top + 1.0) * (n + 1)


def _hungarian(cost: np.ndarray):
    """Optimal assignment on a square finite matrix.

    Returns ``(col_of_row, u, v)`` with ``cost[i, j] - u[i] - v[j] >= 0``
    everywhere and equal to zero on the matching.
    """
    n = cost.shape[0]
    inf = math.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    # p[j]: row matched to column j (1-based, 0 = free); column 0 is virtual
    p = np.zeros(n + 1, dtype=int)
    way = np.zeros(n + 1, dtype=int)
    c = np.zeros((n + 1, n + 1))
    c[1:, 1:] = cost
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = c[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            cand = np.where(free, minv, inf)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.zeros(n, dtype=int)
    for j in range(1, n + 1):
        col_of_row[p[j] - 1] = j - 1
    return col_of_row, u[1:], v[1:]


def _lexicographic(cost: np.ndarray, col_of_row: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Smallest optimal matching in row-major lexicographic order.

    Every optimal matching is a perfect matching of the tight subgraph of an
    optimal dual, so rows are fixed greedily: each row takes the smallest
    tight column that still leaves a perfect matching for the rows after it.
    """
    n = cost.shape[0]
    scale = max(1.0, float(np.max(np.abs(cost)))) if n else 1.0
    tol = 1e-12 * scale * (n + 1)
    tight = (cost - u[:, None] - v[None, :]) <= tol
    col_of_row = col_of_row.copy()
    row_of_col = np.empty(n, dtype=int)
    row_of_col[col_of_row] = np.arange(n)
    adj = [np.flatnonzero(tight[i]) for i in range(n)]

    def find_path(start, target, first, visited):
        # alternating path from row ``start`` to column ``target`` through rows > first
        parent = {}
        queue = deque([start])
        while queue:
            row = queue.popleft()
            for col in adj[row]:
                if visited[col]:
                    continue
                visited[col] = True
                parent[col] = row
                if col == target:
                    path = []
                    while True:
                        r = parent[col]
                        path.append((r, col))
                        if r == start:
                            return path
                        col = col_of_row[r]
                owner = row_of_col[col]
                if owner > first:
                    queue.append(owner)
        return None

    for i in range(n):
        current = col_of_row[i]
        for j in adj[i]:
            if j >= current:
                break
            owner = row_of_col[j]
            if owner < i:
                continue
            visited = np.zeros(n, dtype=bool)
            visited[j] = True
            path = find_path(owner, current, i, visited)
            if path is None:
                continue
            col_of_row[i] = j
            row_of_col[j] = i
            for r, cc in path:
                col_of_row[r] = cc
                row_of_col[cc] = r
            break
    return col_of_row


def _solve_square(c: np.ndarray, reject_above: float):
    """Pad ``c`` to square, replace forbidden entries and solve."""
    rows, cols = c.shape
    n = max(rows, cols)
    finite = np.isfinite(c)
    pad = _pad_cost(c[finite], n, reject_above)
    square = np.full((n, n), pad)
    square[:rows, :cols] = np.where(finite, c, pad)
    col_of_row, u, v = _hungarian(square)
    col_of_row = _lexicographic(square, col_of_row, u, v)
    return col_of_row


def solve(c, reject_above: float = math.inf) -> AssignmentResult:
    """Optimal matching of rows to columns, then rejection of costly pairs.

    Pairs whose cost exceeds ``reject_above``, is forbidden (non-finite) or
    falls on padding are dropped and both endpoints reported unmatched.
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 2:
        c = c.reshape(0, 0) if c.size == 0 else np.atleast_2d(c)
    rows, cols = c.shape
    if rows == 0 or cols == 0:
        return AssignmentResult([], list(range(rows)), list(range(cols)))
    if np.any(np.isnan(c)):
        raise ValueError("cost matrix contains NaN")
    col_of_row = _solve_square(c, reject_above)
    matches = []
    matched_rows = set()
    matched_cols = set()
    for i in range(rows):
        j = int(col_of_row[i])
        if j >= cols:
            continue
        cost = c[i, j]
        if not math.isfinite(cost) or cost > reject_above:
            continue
        matches.append((i, j))
        matched_rows.add(i)
        matched_cols.add(j)
    return AssignmentResult(
        matches,
        [i for i in range(rows) if i not in matched_rows],
        [j for j in range(cols) if j not in matched_cols],
    )


def min_cost(c) -> float:
    """Total cost of an optimal matching of ``min(rows, cols)`` pairs."""
    c = np.asarray(c, dtype=float)
    if c.size == 0:
        return 0.0
    if not np.all(np.isfinite(c)):
        raise ValueError("min_cost expects a finite matrix")
    rows, cols = c.shape
    col_of_row = _solve_square(c, math.inf)
    return float(sum(c[i, col_of_row[i]] for i in range(rows) if col_of_row[i] < cols))
