"""Exact arboricity via the forest-partition density bound.

The arboricity of a loopless graph equals max over vertex sets S with
|S| >= 2 of ceil(|E(G[S])| / (|S| - 1)).  We find the smallest feasible
forest count k by testing, for each k, whether some S violates
|E(G[S])| <= k (|S| - 1).  The test is a max-flow computation anchored at
each vertex in turn; below a size cap a direct subset enumeration is used
instead (and doubles as an independent oracle in the tests).
"""

from __future__ import annotations

import numpy as np

from .graph import Graph

ENUM_CAP = 16


def _densest_violation_enum(g: Graph, k: int) -> bool:
    """True iff some S (|S| >= 2) has |E(G[S])| > k(|S|-1); enumerated."""
    n = g.n
    for mask in range(1, 1 << n):
        size = bin(mask).count("1")
        if size < 2:
            continue
        inside = sum(1 for u, v in g.edges if (mask >> u) & 1 and (mask >> v) & 1)
        if inside > k * (size - 1):
            return True
    return False


def _feasible_flow(g: Graph, k: int) -> bool:
    """True iff every S satisfies |E(G[S])| <= k(|S|-1), by anchored min-cuts.

    For anchor r, build source -> edge nodes (cap 1), edge -> endpoints
    (cap m+1), vertex -> sink (cap k, except r free).  The min cut equals
    m - max over S containing r of (|E(G[S])| - k(|S|-1)); the max is zero
    exactly when no violating S contains r.
    """
    import scipy.sparse as sp
    from scipy.sparse.csgraph import maximum_flow

    n, m = g.n, g.m
    if m == 0:
        return True
    big = m + 1
    src, snk = 0, 1 + m + n
    for r in range(n):
        rows, cols, caps = [], [], []
        for i, (u, v) in enumerate(g.edges):
            rows.append(src)
            cols.append(1 + i)
            caps.append(1)
            rows.append(1 + i)
            cols.append(1 + m + u)
            caps.append(big)
            if v != u:
                rows.append(1 + i)
                cols.append(1 + m + v)
                caps.append(big)
        for v in range(n):
            if v == r:
                continue
            rows.append(1 + m + v)
            cols.append(snk)
            caps.append(k)
        mat = sp.csr_matrix((np.array(caps, dtype=np.int64), (rows, cols)),
                            shape=(snk + 1, snk + 1))
        cut = maximum_flow(mat, src, snk).flow_value
        if m - cut > 0:
            return False
    return True


def arboricity_exact(g: Graph, enum_cap: int = ENUM_CAP) -> int:
    """Smallest number of forests partitioning the edge set."""
    if g.n < 2:
        raise ValueError("arboricity needs at least two vertices")
    if g.has_self_loops():
        raise ValueError("arboricity is undefined with self-loops")
    if g.m == 0:
        return 1
    check = _densest_violation_enum if g.n <= enum_cap else (
        lambda graph, k: not _feasible_flow(graph, k))
    k = 1
    while check(g, k):
        k += 1
    return k
