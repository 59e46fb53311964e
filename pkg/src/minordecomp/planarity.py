"""Exact graph-property predicates used by the leader-local checks.

Planarity uses the left-right test (exact, edge-addition class) from
networkx; outerplanarity reduces to planarity of the graph plus an apex
vertex adjacent to everything; forest is a plain cycle check.  All three
properties are additive and minor-closed.
"""

from __future__ import annotations

import networkx as nx

from .graph import Graph


def _to_nx_simple(g: Graph) -> nx.Graph:
    h = nx.Graph()
    h.add_nodes_from(range(g.n))
    h.add_edges_from((u, v) for u, v in g.edges if u != v)
    return h


def is_planar(g: Graph) -> bool:
    # parallel edges and self-loops never affect planarity
    ok, _ = nx.check_planarity(_to_nx_simple(g), counterexample=False)
    return bool(ok)


def is_forest(g: Graph) -> bool:
    if any(u == v for u, v in g.edges):
        return False
    seen_pairs = set()
    for u, v in g.edges:
        if (u, v) in seen_pairs:
            return False  # parallel edge = 2-cycle
        seen_pairs.add((u, v))
    h = _to_nx_simple(g)
    return nx.number_of_edges(h) == g.n - nx.number_connected_components(h)


def is_outerplanar(g: Graph) -> bool:
    """A graph is outerplanar iff adding a universal apex keeps it planar."""
    h = _to_nx_simple(g)
    apex = g.n
    h.add_node(apex)
    h.add_edges_from((apex, v) for v in range(g.n))
    ok, _ = nx.check_planarity(h, counterexample=False)
    return bool(ok)


PROPERTY_PREDICATES = {
    "planarity": is_planar,
    "forest": is_forest,
    "outerplanar": is_outerplanar,
}

# a forbidden clique minor per property, used to size arboricity guards
PROPERTY_ARBORICITY_BOUND = {
    "planarity": 3,  # planar graphs decompose into 3 forests
    "forest": 1,
    "outerplanar": 2,
}
