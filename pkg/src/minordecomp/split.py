"""Expander split: replace each vertex by a constant-degree gadget.

Every vertex v becomes a gadget X_v with one gadget vertex per incidence
slot of v.  Gadget shape: a single vertex for degree 1, a single edge for
degree 2, otherwise a cycle plus antipodal chords {i, (i + deg//2) mod deg}
(gadget degree at most 4, so the split graph has maximum degree at most 5).
Each original edge becomes one cross edge between the slot vertices of its
two endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import Graph


@dataclass(frozen=True)
class SplitMap:
    """Correspondence between a graph and its expander split.

    forward[v]  -> (start, stop): contiguous split-vertex range of X_v,
                   ordered by v's edge ranking.
    backward[x] -> (original vertex, edge rank).
    cross[e]    -> split-edge index realizing original edge e (the cross
                   edge of a self-loop is a self-loop at the slot vertex).
    """

    forward: tuple[tuple[int, int], ...]
    backward: tuple[tuple[int, int], ...]
    cross: tuple[int | None, ...]

    def slot(self, v: int, rank: int) -> int:
        start, stop = self.forward[v]
        if not (0 <= rank < stop - start):
            raise ValueError(f"vertex {v} has no incidence rank {rank}")
        return start + rank

    def gadget(self, v: int) -> range:
        start, stop = self.forward[v]
        return range(start, stop)


def _gadget_edges(offset: int, d: int) -> list[tuple[int, int]]:
    if d <= 1:
        return []
    if d == 2:
        return [(offset, offset + 1)]
    edges = [(offset + i, offset + (i + 1) % d) for i in range(d)]
    half = d // 2
    for i in range(d):
        j = (i + half) % d
        if i < j:
            edges.append((offset + i, offset + j))
    return edges


def expander_split(g: Graph) -> tuple[Graph, SplitMap]:
    """Build the split graph and its bidirectional vertex map.

    Isolated vertices pass through as isolated split vertices (a one-vertex
    gadget), so the split vertex count is sum(max(deg, 1)).
    """
    forward = []
    backward = []
    offset = 0
    for v in range(g.n):
        d = g.degree(v)
        width = max(d, 1)
        forward.append((offset, offset + width))
        for r in range(width):
            backward.append((v, r))
        offset += width
    n_split = offset

    split_edges: list[tuple[int, int]] = []
    for v in range(g.n):
        split_edges.extend(_gadget_edges(forward[v][0], g.degree(v)))
    gadget_count = len(split_edges)

    # one cross edge per original edge, between the two slot vertices
    rank_counter = [0] * g.n
    cross_index: list[int | None] = [None] * gadget_count
    for u, v in g.edges:
        ru = rank_counter[u]
        rank_counter[u] += 1
        if v == u:
            # self-loop occupies a single slot; its cross edge is a loop there
            split_edges.append((forward[u][0] + ru, forward[u][0] + ru))
        else:
            rv = rank_counter[v]
            rank_counter[v] += 1
            split_edges.append((forward[u][0] + ru, forward[v][0] + rv))
        cross_index.append(len(split_edges) - 1)

    split = Graph(n_split, split_edges)
    smap = SplitMap(forward=tuple(forward), backward=tuple(backward),
                    cross=tuple(cross_index[gadget_count:]))
    return split, smap


def regularize_even(g: Graph, d: int) -> Graph:
    """Add self-loops until every vertex has degree exactly d (d even).

    One self-loop adds one to the degree, so the deficit d - deg(v) is the
    loop count at v.
    """
    if d % 2 != 0:
        raise ValueError("target degree must be even")
    if d < g.max_degree:
        raise ValueError(f"target degree {d} below maximum degree {g.max_degree}")
    edges = list(g.edges)
    for v in range(g.n):
        edges.extend((v, v) for _ in range(d - g.degree(v)))
    return Graph(g.n, edges, ids=g.ids)
