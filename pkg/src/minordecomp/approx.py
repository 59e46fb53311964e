"""Approximation algorithms on top of the decomposition pipeline.

Each solver decomposes (optionally after a bounded-degree sparsification),
solves every cluster exactly at its leader, repairs across inter-cluster
edges deterministically (ties by vertex id), and reports the achieved
value next to whatever optimum reference is available: brute force on
small instances, closed forms on structured families, or the generic
|E|/2 bound for max cut.  Feasibility of the output is always verified
exactly, whatever the input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .graph import Graph
from .edt import edt_pipeline, EDTDecomposition
from .sparsify import sparsify, Sparsifier
from . import solvers
from .solvers import OracleFailure


@dataclass
class ApproxReport:
    problem: str
    value: int
    solution: object
    feasible: bool
    opt: int | None = None
    opt_kind: str = "unknown"     # brute | closed-form | bound
    ratio: float | None = None
    rounds_charged: int = 0
    decomposition: EDTDecomposition | None = None
    details: dict = field(default_factory=dict)

    def csv_row(self, instance: str, n: int, m: int, eps) -> str:
        opt = self.opt if self.opt is not None else ""
        ratio = f"{self.ratio:.4f}" if self.ratio is not None else ""
        return f"{instance},{n},{m},{eps},{self.value},{opt},{ratio},{self.rounds_charged}"


def _pipeline(g: Graph, eps: Fraction, alpha: int, variant: str, charged: bool):
    if g.m == 0 or g.n <= 1:
        return None
    return edt_pipeline(g, eps, variant=variant, alpha=alpha, charged=charged)


def approx_max_cut(g: Graph, eps: Fraction, alpha: int = 3, variant: str = "A",
                   charged: bool = True, opt: int | None = None) -> ApproxReport:
    """(1-eps)-approximate maximum cut: exact cuts per cluster, combined."""
    eps = Fraction(eps)
    edt = _pipeline(g, eps / 2, alpha, variant, charged)
    side: set[int] = set()
    if edt is not None:
        for c in edt.clusters:
            sub, order = g.induced_subgraph(c)
            _, s = solvers.max_cut_exact(sub)
            side.update(order[v] for v in s)
    value = solvers.cut_size(g, side)
    opt_kind = "given"
    if opt is None:
        parts = solvers.bipartition(g)
        if parts is not None:
            opt = sum(1 for u, v in g.edges if u != v)
            opt_kind = "closed-form"
        elif g.n <= 24:
            opt, _ = solvers.max_cut_exact(g, cap=24)
            opt_kind = "brute"
        else:
            opt = None
            opt_kind = "bound"
    ratio = value / opt if opt else None
    return ApproxReport(problem="maxcut", value=value, solution=side,
                        feasible=True, opt=opt, opt_kind=opt_kind, ratio=ratio,
                        rounds_charged=edt.charged_rounds if edt else 0,
                        decomposition=edt)


def approx_mis(g: Graph, eps: Fraction, alpha: int = 3, variant: str = "A",
               charged: bool = True, opt: int | None = None) -> ApproxReport:
    """(1-eps)-approximate maximum independent set via the degree sparsifier,
    per-cluster exact solves, and conflict repair (drop the larger id)."""
    eps = Fraction(eps)
    sp = sparsify(g, eps, "mis", alpha)
    eps_star = eps / (alpha * (2 * alpha - 1))
    edt = _pipeline(sp.graph, eps_star, alpha, variant, charged) \
        if sp.graph.n else None
    chosen: set[int] = set()
    if edt is not None:
        for c in edt.clusters:
            sub, order = sp.graph.induced_subgraph(c)
            for v in solvers.mis_exact(sub, cap=max(solvers.MIS_BNB_CAP, 0)):
                chosen.add(sp.order[order[v]])
    elif sp.graph.n:
        chosen.update(sp.order[v] for v in range(sp.graph.n))
    # conflict repair on inter-cluster edges: remove the larger id
    for u, v in g.edges:
        if u != v and u in chosen and v in chosen:
            chosen.discard(max(u, v))
    feasible = solvers.is_independent(g, chosen)
    opt_kind = "given"
    if opt is None:
        opt, opt_kind = _mis_reference(g)
    ratio = len(chosen) / opt if opt else None
    return ApproxReport(problem="mis", value=len(chosen), solution=chosen,
                        feasible=feasible, opt=opt, opt_kind=opt_kind,
                        ratio=ratio,
                        rounds_charged=edt.charged_rounds if edt else 0,
                        decomposition=edt, details={"d": sp.d})


def approx_matching(g: Graph, eps: Fraction, alpha: int = 3, variant: str = "A",
                    charged: bool = True, opt: int | None = None) -> ApproxReport:
    eps = Fraction(eps)
    sp = sparsify(g, eps, "matching", alpha)
    delta = max(1, sp.graph.max_degree)
    eps_star = eps / (2 * delta - 1) if delta > 0 else eps
    edt = _pipeline(sp.graph, eps_star, alpha, variant, charged)
    matching: set[tuple[int, int]] = set()
    if edt is not None:
        for c in edt.clusters:
            sub, order = sp.graph.induced_subgraph(c)
            for u, v in solvers.max_matching(sub):
                a, b = sp.order[order[u]], sp.order[order[v]]
                matching.add((min(a, b), max(a, b)))
    feasible = solvers.is_matching(g, matching)
    opt_kind = "given"
    if opt is None:
        opt = len(solvers.max_matching(g))
        opt_kind = "exact-blossom"
    ratio = len(matching) / opt if opt else None
    return ApproxReport(problem="matching", value=len(matching),
                        solution=matching, feasible=feasible, opt=opt,
                        opt_kind=opt_kind, ratio=ratio,
                        rounds_charged=edt.charged_rounds if edt else 0,
                        decomposition=edt, details={"d": sp.d})


def approx_vc(g: Graph, eps: Fraction, alpha: int = 3, variant: str = "A",
              charged: bool = True, opt: int | None = None) -> ApproxReport:
    """(1+eps)-approximate vertex cover: high-degree vertices join the
    cover, clusters solve exactly, inter-cluster edges add their smaller
    endpoint."""
    eps = Fraction(eps)
    sp = sparsify(g, eps, "vc", alpha)
    delta = max(1, sp.graph.max_degree)
    eps_star = eps / (2 * delta - 1)
    edt = _pipeline(sp.graph, eps_star, alpha, variant, charged) \
        if sp.graph.n else None
    cover: set[int] = set(sp.v_high)
    if edt is not None:
        owner = edt.cluster_of_vertex()
        for c in edt.clusters:
            sub, order = sp.graph.induced_subgraph(c)
            for v in solvers.vc_exact(sub):
                cover.add(sp.order[order[v]])
        for u, v in sp.graph.edges:
            if u != v and owner[u] != owner[v]:
                cover.add(sp.order[min(u, v)])
    feasible = solvers.is_vertex_cover(g, cover)
    opt_kind = "given"
    if opt is None:
        if g.n <= 24:
            opt = len(solvers.vc_exact(g, cap=24))
            opt_kind = "brute"
        else:
            opt = g.n - len(solvers.mis_exact(g)) if g.n <= 40 else None
            opt_kind = "brute" if opt is not None else "none"
    ratio = len(cover) / opt if opt else None
    return ApproxReport(problem="vc", value=len(cover), solution=cover,
                        feasible=feasible, opt=opt, opt_kind=opt_kind,
                        ratio=ratio,
                        rounds_charged=edt.charged_rounds if edt else 0,
                        decomposition=edt, details={"d": sp.d})


def _mis_reference(g: Graph) -> tuple[int | None, str]:
    """Best available optimum: closed forms for paths/cycles/grids via the
    bipartite route, brute force on small instances."""
    try:
        if g.n <= 60:
            return len(solvers.mis_exact(g)), "exact"
    except OracleFailure:
        pass
    if solvers.bipartition(g) is not None:
        return len(solvers.mis_bipartite(g)), "closed-form"
    return None, "none"


# -- decomposition wrappers -------------------------------------------------------

def ldd_distributed(g: Graph, eps: Fraction, variant: str = "A", alpha: int = 3,
                    charged: bool = True):
    """The pipeline output read as a plain low-diameter decomposition."""
    edt = edt_pipeline(g, Fraction(eps), variant=variant, alpha=alpha,
                       charged=charged)
    return list(edt.clusters), {"eps_measured": edt.eps_measured,
                                "d_measured": edt.d_measured,
                                "edt": edt}


def expander_decomp_distributed(g: Graph, eps: Fraction, flavor: str = "plain",
                                alpha: int = 3, charged: bool = True):
    """Pipeline plus a leader-local expander decomposition inside every
    cluster; returns the union partition with per-piece certificates for
    the small pieces."""
    from .seqdecomp import seq_expander_decomposition_minorfree
    from .overlap import overlap_expander_decomposition
    from .measures import conductance_exact, EXACT_CUT_CAP

    eps = Fraction(eps)
    edt = edt_pipeline(g, eps / 2, variant="A", alpha=alpha, charged=charged)
    pieces: list[frozenset[int]] = []
    overlap_count = 1
    for c in edt.clusters:
        sub, order, _ = g.induced_subgraph_with_edges(c)
        if flavor == "plain":
            dec = seq_expander_decomposition_minorfree(sub, eps / 2)
            pieces.extend(frozenset(order[v] for v in p) for p in dec.pieces)
        else:
            res = overlap_expander_decomposition(sub, eps / 2, alpha)
            overlap_count = max(overlap_count, res.overlap)
            pieces.extend(frozenset(order[v] for v in p)
                          for p in res.clustering.clusters)
    certs = {}
    for i, p in enumerate(pieces):
        if 1 < len(p) <= EXACT_CUT_CAP:
            sub, _ = g.induced_subgraph(p)
            if len(sub.connected_components()) == 1:
                certs[i] = conductance_exact(sub)[0]
    from .overlap import inter_cluster_fraction
    return pieces, {"fraction": inter_cluster_fraction(g, pieces),
                    "overlap": overlap_count, "certificates": certs,
                    "edt": edt}
