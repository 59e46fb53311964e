"""Immutable undirected multigraph used throughout the package.

Vertices are integers 0..n-1.  Edges are stored as an ordered tuple of
unordered pairs; parallel edges and self-loops are allowed.  A self-loop
contributes exactly one to the degree of its vertex (this convention is
assumed by the degree-regularization and random-walk machinery, so it is
applied consistently everywhere, including volumes).
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np


class Graph:
    """Immutable multigraph with per-vertex integer identifiers.

    Parameters
    ----------
    n : vertex count.
    edges : iterable of (u, v) pairs; self-loops as (v, v).
    ids : optional distinct integer identifier per vertex (default 0..n-1).
        Identifiers must fit in 63 bits.
    """

    __slots__ = ("n", "edges", "ids", "_deg", "_inc", "_adj", "_id_to_vertex")

    def __init__(self, n: int, edges: Iterable[tuple[int, int]], ids: Sequence[int] | None = None):
        if n < 0:
            raise ValueError("vertex count must be nonnegative")
        es = []
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) out of range for n={n}")
            es.append((u, v) if u <= v else (v, u))
        self.n = n
        self.edges: tuple[tuple[int, int], ...] = tuple(es)
        if ids is None:
            ids = range(n)
        ids = tuple(int(x) for x in ids)
        if len(ids) != n or len(set(ids)) != n:
            raise ValueError("ids must be one distinct integer per vertex")
        if any(not (0 <= x < 2**63) for x in ids):
            raise ValueError("ids must fit in 63 bits")
        self.ids = ids
        deg = np.zeros(n, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            if v != u:
                deg[v] += 1
        self._deg = deg
        self._inc = None
        self._adj = None
        self._id_to_vertex = None

    # -- basic accessors ---------------------------------------------------

    @property
    def m(self) -> int:
        """Number of edges (self-loops count once)."""
        return len(self.edges)

    def degree(self, v: int) -> int:
        return int(self._deg[v])

    @property
    def degrees(self) -> np.ndarray:
        """Read-only degree vector (self-loop adds one)."""
        d = self._deg.view()
        d.flags.writeable = False
        return d

    @property
    def max_degree(self) -> int:
        return int(self._deg.max()) if self.n else 0

    def vertex_of_id(self, ident: int) -> int:
        if self._id_to_vertex is None:
            self._id_to_vertex = {x: v for v, x in enumerate(self.ids)}
        return self._id_to_vertex[ident]

    def incidence(self) -> list[list[int]]:
        """Per-vertex list of incident edge indices, ordered by edge index.

        The position of an edge in this list is the vertex's rank for it;
        a self-loop appears once (one incidence slot, matching the degree
        convention).
        """
        if self._inc is None:
            inc: list[list[int]] = [[] for _ in range(self.n)]
            for i, (u, v) in enumerate(self.edges):
                inc[u].append(i)
                if v != u:
                    inc[v].append(i)
            self._inc = inc
        return self._inc

    def neighbors(self, v: int) -> list[int]:
        """Neighbor per incidence slot (self-loop slot yields v itself)."""
        if self._adj is None:
            adj: list[list[int]] = [[] for _ in range(self.n)]
            for i, (u, w) in enumerate(self.edges):
                adj[u].append(w)
                if w != u:
                    adj[w].append(u)
            self._adj = adj
        return self._adj[v]

    def edge_other_end(self, edge_index: int, v: int) -> int:
        u, w = self.edges[edge_index]
        if v == u:
            return w
        if v == w:
            return u
        raise ValueError(f"vertex {v} not an endpoint of edge {edge_index}")

    def has_self_loops(self) -> bool:
        return any(u == v for u, v in self.edges)

    # -- derived graphs ----------------------------------------------------

    def induced_subgraph(self, s: Iterable[int]) -> tuple["Graph", list[int]]:
        """Induced subgraph on `s`; returns (graph, vertex map new->old)."""
        order = sorted(set(int(v) for v in s))
        pos = {v: i for i, v in enumerate(order)}
        es = [(pos[u], pos[v]) for u, v in self.edges if u in pos and v in pos]
        return Graph(len(order), es, ids=[self.ids[v] for v in order]), order

    def induced_subgraph_with_edges(self, s: Iterable[int]) -> tuple["Graph", list[int], list[int]]:
        """Induced subgraph plus vertex map (new->old) and edge map (new->old)."""
        order = sorted(set(int(v) for v in s))
        pos = {v: i for i, v in enumerate(order)}
        es, emap = [], []
        for i, (u, v) in enumerate(self.edges):
            if u in pos and v in pos:
                es.append((pos[u], pos[v]))
                emap.append(i)
        return Graph(len(order), es, ids=[self.ids[v] for v in order]), order, emap

    def subgraph_of_edges(self, edge_indices: Iterable[int],
                          extra_vertices: Iterable[int] = ()) -> tuple["Graph", list[int]]:
        """Graph spanned by the given edge indices plus isolated extras."""
        idx = sorted(set(int(i) for i in edge_indices))
        verts = set(int(v) for v in extra_vertices)
        for i in idx:
            u, v = self.edges[i]
            verts.add(u)
            verts.add(v)
        order = sorted(verts)
        pos = {v: i for i, v in enumerate(order)}
        es = [(pos[self.edges[i][0]], pos[self.edges[i][1]]) for i in idx]
        return Graph(len(order), es, ids=[self.ids[v] for v in order]), order

    # -- traversal ---------------------------------------------------------

    def bfs_layers(self, root: int, allowed: frozenset[int] | None = None) -> dict[int, int]:
        """BFS layer index per reachable vertex, restricted to `allowed`."""
        from collections import deque

        layer = {root: 0}
        q = deque([root])
        while q:
            v = q.popleft()
            for u in self.neighbors(v):
                if u == v or u in layer:
                    continue
                if allowed is not None and u not in allowed:
                    continue
                layer[u] = layer[v] + 1
                q.append(u)
        return layer

    def connected_components(self, within: Iterable[int] | None = None) -> list[frozenset[int]]:
        pool = set(range(self.n)) if within is None else set(int(v) for v in within)
        comps = []
        while pool:
            root = min(pool)
            seen = self.bfs_layers(root, allowed=frozenset(pool))
            comp = frozenset(seen)
            comps.append(comp)
            pool -= comp
        return sorted(comps, key=min)

    # -- misc --------------------------------------------------------------

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"

    def __eq__(self, other) -> bool:
        return (isinstance(other, Graph) and self.n == other.n
                and self.edges == other.edges and self.ids == other.ids)

    def __hash__(self) -> int:
        return hash((self.n, self.edges, self.ids))


def id_bit_width(n: int) -> int:
    """Bits needed for an identifier in a graph of n vertices."""
    return max(1, int(np.ceil(np.log2(n + 1))))


def as_vertex_set(g: Graph, s: Iterable[int]) -> frozenset[int]:
    out = frozenset(int(v) for v in s)
    for v in out:
        if not (0 <= v < g.n):
            raise ValueError(f"vertex {v} out of range")
    return out


# -- text / JSON interchange ------------------------------------------------

def write_edge_list(g: Graph, path: str) -> None:
    """Edge-list text format: header `# n m`, then one `u v` line per edge."""
    with open(path, "w") as f:
        f.write(f"# {g.n} {g.m}\n")
        for u, v in g.edges:
            f.write(f"{u} {v}\n")


def read_edge_list(path: str) -> Graph:
    with open(path) as f:
        header = f.readline().split()
        if len(header) != 3 or header[0] != "#":
            raise ValueError("expected header line '# n m'")
        n, m = int(header[1]), int(header[2])
        edges = []
        for line in f:
            line = line.strip()
            if not line:
                continue
            u, v = line.split()
            edges.append((int(u), int(v)))
    if len(edges) != m:
        raise ValueError(f"header claims {m} edges, file has {len(edges)}")
    return Graph(n, edges)


def partition_to_json(clusters: Sequence[Iterable[int]]) -> str:
    return json.dumps({"clusters": [sorted(int(v) for v in c) for c in clusters]})


def partition_from_json(text: str) -> list[frozenset[int]]:
    data = json.loads(text)
    return [frozenset(c) for c in data["clusters"]]


def fraction_to_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def parse_fraction(text: str) -> Fraction:
    """Parse 'a/b' or a plain integer/decimal string into an exact rational."""
    text = text.strip()
    if "/" in text:
        a, b = text.split("/")
        return Fraction(int(a), int(b))
    return Fraction(text)
