"""Bounded-degree sparsifiers for matching, vertex cover, independent set.

High-degree vertices either join the cover outright (VC), drop out of the
search space (independent set), or lose all but d of their incident edges
(matching: a vertex marks min(deg, d) incident edges lowest-rank-first and
only doubly-marked edges survive).  Degree thresholds are c * alpha / eps
(matching, VC) and c * alpha^2 / eps (independent set) with c
configurable; acceptance binds to measured ratios, not to c.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .graph import Graph

DEFAULT_C_VC = 4
DEFAULT_C_MIS = 4


@dataclass
class Sparsifier:
    kind: str                   # "vc" | "matching" | "mis"
    d: int
    graph: Graph                # the reduced instance
    order: list[int]            # reduced vertex -> original vertex
    v_high: frozenset[int]      # original ids (vc / mis kinds)
    v_low: frozenset[int]


def sparsify(g: Graph, eps: Fraction, kind: str, alpha: int,
             c_vc: int = DEFAULT_C_VC, c_mis: int = DEFAULT_C_MIS) -> Sparsifier:
    eps = Fraction(eps)
    if not (0 < eps < 1):
        raise ValueError("eps must be in (0, 1)")
    if kind in ("vc", "mis"):
        d = math.ceil((c_vc * alpha if kind == "vc" else c_mis * alpha * alpha) / eps)
        high = frozenset(v for v in range(g.n) if g.degree(v) >= d)
        low = frozenset(range(g.n)) - high
        sub, order = g.induced_subgraph(low)
        return Sparsifier(kind=kind, d=d, graph=sub, order=order,
                          v_high=high, v_low=low)
    if kind == "matching":
        d = math.ceil(c_vc * alpha / eps)
        marks: list[set[int]] = []
        inc = g.incidence()
        for v in range(g.n):
            take = [e for e in inc[v] if g.edges[e][0] != g.edges[e][1]][:d]
            marks.append(set(take))
        kept = [e for e, (u, v) in enumerate(g.edges)
                if u != v and e in marks[u] and e in marks[v]]
        sub, order = g.subgraph_of_edges(kept, extra_vertices=range(g.n))
        out = Sparsifier(kind=kind, d=d, graph=sub, order=order,
                         v_high=frozenset(), v_low=frozenset(range(g.n)))
        if sub.max_degree > d:
            raise AssertionError("marking left a vertex above the threshold")
        return out
    raise ValueError(f"unknown sparsifier kind {kind}")
