"""Rectangular linear assignment by shortest augmenting paths (Hungarian method)."""

from __future__ import annotations

import numpy as np

SENTINEL = 1e6


def solve_assignment(cost) -> list[tuple[int, int]]:
    """Minimum-cost matching of size ``min(rows, cols)``.

    Returns ``(row, col)`` pairs sorted by row. Runs in O(n^2 m) for an
    ``n x m`` matrix with ``n <= m`` (the matrix is transposed otherwise).
    Forbidden pairs should carry a large finite cost such as ``SENTINEL``.
    """
    a = np.asarray(cost, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("cost matrix must be two-dimensional")
    if a.size == 0:
        return []
    if not np.all(np.isfinite(a)):
        raise ValueError("cost matrix must be finite")
    transposed = a.shape[0] > a.shape[1]
    if transposed:
        a = a.T
    n, m = a.shape

    # 1-based potentials; column 0 is a virtual column holding the row being inserted
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    match = np.zeros(m + 1, dtype=np.int64)  # match[j] = row assigned to column j
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            free = ~used[1:]
            reduced = a[i0 - 1] - u[i0] - v[1:]
            better = free & (reduced < minv[1:])
            minv[1:][better] = reduced[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[match[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1

    pairs = [(int(match[j]) - 1, j - 1) for j in range(1, m + 1) if match[j]]
    if transposed:
        pairs = [(c, r) for r, c in pairs]
    return sorted(pairs)


def assignment_cost(cost, pairs) -> float:
    a = np.asarray(cost, dtype=np.float64)
    total = 0.0
    for r, c in sorted(pairs):
        total += a[r, c]
    return total
