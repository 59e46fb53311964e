"""Deterministic graph generators for the test corpus.

Every generator is a pure function of its parameters (seeds included), and
each resulting graph carries a documented minor-freeness status: grid,
path, cycle, tree and Delaunay-planar graphs are planar (hence K5-minor-
free); k5_planted and random_regular are flagged non-minor-free.
"""

from __future__ import annotations

import numpy as np

from .graph import Graph


def grid(w: int, h: int) -> Graph:
    if w < 1 or h < 1:
        raise ValueError("grid dimensions must be positive")
    def idx(x, y):
        return y * w + x
    edges = []
    for y in range(h):
        for x in range(w):
            if x + 1 < w:
                edges.append((idx(x, y), idx(x + 1, y)))
            if y + 1 < h:
                edges.append((idx(x, y), idx(x, y + 1)))
    return Graph(w * h, edges)


def path(n: int) -> Graph:
    if n < 1:
        raise ValueError("path needs at least one vertex")
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle(n: int) -> Graph:
    if n < 3:
        raise ValueError("cycle needs at least three vertices")
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def star(k: int) -> Graph:
    """K_{1,k}: center is vertex 0."""
    if k < 1:
        raise ValueError("star needs at least one leaf")
    return Graph(k + 1, [(0, i) for i in range(1, k + 1)])


def complete(n: int) -> Graph:
    return Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def random_tree(n: int, seed: int) -> Graph:
    """Uniform-ish random tree: vertex i attaches to a random earlier vertex."""
    if n < 1:
        raise ValueError("tree needs at least one vertex")
    rng = np.random.default_rng(seed)
    edges = [(int(rng.integers(0, i)), i) for i in range(1, n)]
    return Graph(n, edges)


def random_planar(n: int, seed: int) -> Graph:
    """Delaunay triangulation of n random points (planar by construction)."""
    if n < 1:
        raise ValueError("need at least one vertex")
    if n == 1:
        return Graph(1, [])
    if n == 2:
        return Graph(2, [(0, 1)])
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    from scipy.spatial import Delaunay

    tri = Delaunay(pts)
    edges = set()
    for simplex in tri.simplices:
        a, b, c = (int(x) for x in simplex)
        edges.add((min(a, b), max(a, b)))
        edges.add((min(b, c), max(b, c)))
        edges.add((min(a, c), max(a, c)))
    return Graph(n, sorted(edges))


def k5_planted(n: int, seed: int, count: int) -> Graph:
    """Planar base plus `count` disjoint K5 gadgets, each attached by one edge.

    Each gadget uses five fresh vertices carrying all ten K5 edges (a K5
    subdivision with no subdivision vertices), so destroying all gadgets
    requires deleting at least one edge per gadget; deleting exactly one
    edge inside each K5 makes the graph planar again.  Total edge count is
    base_m + 11 * count, giving exact farness accounting for the tester.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    base = random_planar(n, seed)
    rng = np.random.default_rng(seed + 0x9E3779B9)
    edges = list(base.edges)
    total = base.n
    for _ in range(count):
        anchor = int(rng.integers(0, base.n))
        block = list(range(total, total + 5))
        for i in range(5):
            for j in range(i + 1, 5):
                edges.append((block[i], block[j]))
        edges.append((anchor, block[0]))
        total += 5
    return Graph(total, edges)


def random_regular(n: int, d: int, seed: int) -> Graph:
    """Random simple d-regular graph by the pairing model with retries;
    dense targets come from the complement of a sparse sample."""
    if n * d % 2 != 0:
        raise ValueError("n*d must be even")
    if d >= n:
        raise ValueError("degree must be below n for a simple graph")
    if d < 1:
        raise ValueError("degree must be positive")
    if d > n // 2 and (n - 1 - d) >= 1:
        sparse = random_regular(n, n - 1 - d, seed)
        present = set(sparse.edges)
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)
                 if (i, j) not in present]
        return Graph(n, edges)
    for attempt in range(1000):
        rng = np.random.default_rng((seed, attempt))
        stubs = np.repeat(np.arange(n), d)
        rng.shuffle(stubs)
        pairs = stubs.reshape(-1, 2)
        seen = set()
        ok = True
        for u, v in pairs:
            u, v = int(u), int(v)
            if u == v or (min(u, v), max(u, v)) in seen:
                ok = False
                break
            seen.add((min(u, v), max(u, v)))
        if ok:
            return Graph(n, sorted(seen))
    raise RuntimeError("failed to sample a simple regular graph; try another seed")


MINOR_FREE_GENERATORS = {"grid", "path", "cycle", "star", "random_tree", "random_planar"}
NON_MINOR_FREE_GENERATORS = {"k5_planted", "random_regular", "complete"}
