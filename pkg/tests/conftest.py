import itertools
from fractions import Fraction

import pytest

from minordecomp.graph import Graph
from minordecomp import generators as gen


def tag_messages(g: Graph, start: int = 0):
    """deg(v) distinct tags per vertex, numbered consecutively."""
    out, t = [], start
    for v in range(g.n):
        row = list(range(t, t + g.degree(v)))
        t += g.degree(v)
        out.append(row)
    return out, t - start


# -- independent oracles (subset enumeration, no numpy) -------------------------

def conductance_oracle(g: Graph):
    """Exact minimum conductance by plain subset iteration."""
    total = sum(g.degree(v) for v in range(g.n))
    best = None
    for r in range(1, g.n):
        for s in itertools.combinations(range(g.n), r):
            ss = set(s)
            vol = sum(g.degree(v) for v in ss)
            den = min(vol, total - vol)
            if den == 0:
                continue
            cut = sum(1 for u, v in g.edges if u != v and (u in ss) != (v in ss))
            val = Fraction(cut, den)
            if best is None or val < best:
                best = val
    return best


def sparsity_oracle(g: Graph):
    best = None
    for r in range(1, g.n):
        for s in itertools.combinations(range(g.n), r):
            ss = set(s)
            cut = sum(1 for u, v in g.edges if u != v and (u in ss) != (v in ss))
            val = Fraction(cut, min(len(ss), g.n - len(ss)))
            if best is None or val < best:
                best = val
    return best


def arboricity_oracle(g: Graph) -> int:
    """Nash-Williams by subset iteration (small n only)."""
    best = Fraction(0)
    for r in range(2, g.n + 1):
        for s in itertools.combinations(range(g.n), r):
            ss = set(s)
            inside = sum(1 for u, v in g.edges if u in ss and v in ss and u != v)
            best = max(best, Fraction(inside, len(ss) - 1))
    import math
    return max(1, math.ceil(best))


def mis_oracle(g: Graph) -> int:
    """Maximum independent set by subset iteration (n <= 20)."""
    best = 0
    adj = [set() for _ in range(g.n)]
    for u, v in g.edges:
        if u != v:
            adj[u].add(v)
            adj[v].add(u)
    order = sorted(range(g.n), key=lambda v: -len(adj[v]))

    def rec(i, chosen, banned):
        nonlocal best
        if g.n - i + len(chosen) <= best:
            return
        if i == len(order):
            best = max(best, len(chosen))
            return
        v = order[i]
        if v not in banned:
            rec(i + 1, chosen | {v}, banned | adj[v])
        rec(i + 1, chosen, banned)

    rec(0, set(), set())
    return best


@pytest.fixture(scope="session")
def small_corpus():
    """Graphs with few edges, exact everything."""
    return [
        ("K2", gen.path(2)),
        ("P3", gen.path(3)),
        ("P5", gen.path(5)),
        ("C4", gen.cycle(4)),
        ("C6", gen.cycle(6)),
        ("star4", gen.star(4)),
        ("star7", gen.star(7)),
        ("K4", gen.complete(4)),
        ("grid2x3", gen.grid(2, 3)),
        ("tree9", gen.random_tree(9, 3)),
    ]


@pytest.fixture(scope="session")
def planar_corpus():
    """Mid-size planar instances used by decomposition tests."""
    out = [
        ("grid4", gen.grid(4, 4)),
        ("grid6", gen.grid(6, 6)),
        ("P30", gen.path(30)),
        ("C20", gen.cycle(20)),
        ("tree30", gen.random_tree(30, 1)),
    ]
    for seed in (2, 5):
        out.append((f"planar25-{seed}", gen.random_planar(25, seed)))
    return out
