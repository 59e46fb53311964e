"""Sequential expander-decomposition oracles (leader-local computation).

`seq_expander_decomposition` removes sparse cuts recursively: below the
brute-force cap the cut search is exact (so accepted pieces carry an exact
conductance certificate); above it a Fiedler sweep stands in and accepted
pieces are flagged non-exact.  The minor-free variant first applies the
band-chop low-diameter decomposition and then refines twice, shrinking the
per-piece vertex counts that enter the conductance targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .graph import Graph
from .ldd import ldd_sequential, cut_edges_of_partition
from .measures import (EXACT_CUT_CAP, conductance_exact,
                       conductance_sweep_lower_bound)


@dataclass
class SeqDecomposition:
    pieces: list[frozenset[int]]
    phi_target: Fraction
    deleted_edges: int
    deleted_fraction: Fraction
    exact: bool                       # every accept/cut decision was exact
    certificates: dict[int, Fraction] = field(default_factory=dict)


def _plain_edge_count(g: Graph) -> int:
    return sum(1 for u, v in g.edges if u != v)


def seq_expander_decomposition(g: Graph, eps: Fraction,
                               cap: int = EXACT_CUT_CAP,
                               within: Iterable[int] | None = None) -> SeqDecomposition:
    """Partition (of `within`, default V) whose multi-vertex pieces have
    conductance at least eps / (4 ceil(log2 n)) in their induced subgraphs."""
    eps = Fraction(eps)
    if not (0 < eps < 1):
        raise ValueError("eps must be in (0, 1)")
    pool = sorted(range(g.n)) if within is None else sorted(set(within))
    n_ref = max(2, len(pool))
    phi = eps / (4 * max(1, math.ceil(math.log2(n_ref))))

    pieces: list[frozenset[int]] = []
    certificates: dict[int, Fraction] = {}
    exact = True
    stack = [frozenset(c) for c in g.connected_components(within=pool)]
    while stack:
        piece = stack.pop()
        if len(piece) <= 1:
            pieces.append(piece)
            continue
        sub, order = g.induced_subgraph(piece)
        comps = sub.connected_components()
        if len(comps) > 1:
            stack.extend(frozenset(order[v] for v in comp) for comp in comps)
            continue
        if sub.n <= cap:
            val, cut = conductance_exact(sub, cap)
            if val < phi:
                side = frozenset(order[v] for v in cut)
                stack.append(side)
                stack.append(piece - side)
            else:
                certificates[len(pieces)] = val
                pieces.append(piece)
        else:
            sweep = conductance_sweep_lower_bound(sub)
            if sweep["cut_value"] is not None and sweep["cut_value"] < phi:
                side = frozenset(order[v] for v in sweep["cut"])
                stack.append(side)
                stack.append(piece - side)
            else:
                exact = False  # accepted without an exact certificate
                pieces.append(piece)

    pieces = sorted(pieces, key=min)
    deleted = len(cut_edges_of_partition(g, pieces)) if within is None else \
        _deleted_within(g, pieces, set(pool))
    m = _plain_edge_count(g) if within is None else \
        sum(1 for u, v in g.edges if u != v and u in set(pool) and v in set(pool))
    frac = Fraction(deleted, m) if m else Fraction(0)
    return SeqDecomposition(pieces=pieces, phi_target=phi, deleted_edges=deleted,
                            deleted_fraction=frac, exact=exact,
                            certificates=certificates)


def _deleted_within(g: Graph, pieces, pool: set[int]) -> int:
    owner = {}
    for k, piece in enumerate(pieces):
        for v in piece:
            owner[v] = k
    return sum(1 for u, v in g.edges
               if u != v and u in pool and v in pool and owner[u] != owner[v])


@dataclass
class MinorFreeDecomposition:
    pieces: list[frozenset[int]]
    deleted_fraction: Fraction
    stage_fractions: tuple[Fraction, Fraction, Fraction]
    phi_targets: tuple[Fraction, ...]
    exact: bool


def seq_expander_decomposition_minorfree(g: Graph, eps: Fraction,
                                         cap: int = EXACT_CUT_CAP,
                                         r_chop: int = 3) -> MinorFreeDecomposition:
    """Three-stage refinement: band-chop at eps/3, then two expander
    decompositions at eps/3 whose conductance targets use the shrinking
    per-piece sizes."""
    eps = Fraction(eps)
    if not (0 < eps < 1):
        raise ValueError("eps must be in (0, 1)")
    third = eps / 3
    m = _plain_edge_count(g)

    stage1 = ldd_sequential(g, third, r_chop=r_chop)
    cut1 = len(cut_edges_of_partition(g, stage1))

    stage2: list[frozenset[int]] = []
    phis: list[Fraction] = []
    exact = True
    for piece in stage1:
        dec = seq_expander_decomposition(g, third, cap=cap, within=piece)
        stage2.extend(dec.pieces)
        phis.append(dec.phi_target)
        exact = exact and dec.exact
    cut2 = len(cut_edges_of_partition(g, stage2)) - cut1

    stage3: list[frozenset[int]] = []
    for piece in stage2:
        dec = seq_expander_decomposition(g, third, cap=cap, within=piece)
        stage3.extend(dec.pieces)
        phis.append(dec.phi_target)
        exact = exact and dec.exact
    cut3 = len(cut_edges_of_partition(g, stage3)) - cut1 - cut2

    fracs = tuple(Fraction(c, m) if m else Fraction(0) for c in (cut1, cut2, cut3))
    total = Fraction(cut1 + cut2 + cut3, m) if m else Fraction(0)
    return MinorFreeDecomposition(pieces=sorted(stage3, key=min),
                                  deleted_fraction=total,
                                  stage_fractions=fracs,
                                  phi_targets=tuple(sorted(set(phis))),
                                  exact=exact)
