"""Cluster decompositions with a verified routing method.

An EDT decomposition is a vertex partition with per-cluster leaders and a
routing method that moves deg(v) tagged messages from every vertex to its
cluster leader (and back, running in reverse).  Methods come in four
kinds: `trivial` (singleton, leader holds its own messages), `balance`
(token-balancing executions on the cluster's supergraph), `walk` (shared
derandomized-walk schedule), and `merged` (star composition over an older
decomposition).  Every method stores a deterministic plan from which both
the measured round count and the message-level replay are derived.

Messages are tagged by a global scheme: vertex v owns tags
offset[v] .. offset[v]+deg(v)-1.  Clusters whose routing graphs share a
base edge are serialized into batches; the decomposition's T is the sum
over batches of the longest member window.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .graph import Graph
from .ldd import ldd_sequential
from .measures import diameter_of_induced, conductance_estimate
from .overlap import (OverlapClustering, OverlapDecompositionResult,
                      overlap_expander_decomposition, inter_cluster_fraction,
                      DecompositionError)
from .seqdecomp import seq_expander_decomposition_minorfree
from .balance import gather_by_balancing, GatherOutcome, GatherProgressError
from .walks import (WalkSchedule, synthesize_shared_schedule, WalkInstance,
                    simulate_walks, ScheduleSearchError)
from .stars import cluster_graph_from_partition, heavy_stars, HeavyStarsViolation

EXEC_CAP = 16
RESPONSE_OFFSET = 1 << 40


class TagSpace:
    """Global message tags: vertex v owns a contiguous block of deg(v)."""

    def __init__(self, g: Graph):
        degs = g.degrees
        self.offsets = np.zeros(g.n + 1, dtype=np.int64)
        np.cumsum(degs, out=self.offsets[1:])

    def tags_of(self, v: int) -> list[int]:
        return list(range(int(self.offsets[v]), int(self.offsets[v + 1])))

    def origin_of(self, tag: int) -> int:
        return int(np.searchsorted(self.offsets, tag, side="right") - 1)

    @staticmethod
    def response(tag: int) -> int:
        return tag + RESPONSE_OFFSET


@dataclass(frozen=True)
class TagContext:
    """Tag plumbing for builders running on an induced subgraph: vertices of
    the builder graph map to global tags and global walk-slot keys, so a
    locally built method still moves every vertex's full global load."""

    tags_of: object           # builder vertex -> list of global tags
    slot_base_of: object      # builder vertex -> global slot key base
    probe_base: int           # distinct space for synthetic probe tags

    @classmethod
    def for_graph(cls, g: Graph) -> "TagContext":
        ts = TagSpace(g)
        return cls(tags_of=ts.tags_of,
                   slot_base_of=lambda v: int(ts.offsets[v]),
                   probe_base=int(ts.offsets[-1]) + 1)

    @classmethod
    def mapped(cls, global_ts: TagSpace, order: Sequence[int]) -> "TagContext":
        return cls(tags_of=lambda lv: global_ts.tags_of(order[lv]),
                   slot_base_of=lambda lv: int(global_ts.offsets[order[lv]]),
                   probe_base=int(global_ts.offsets[-1]) + 1)


@dataclass
class RoutingGroup:
    kind: str                         # trivial | balance | walk | merged
    vertices: tuple[int, ...]         # base vertices of the routing graph
    edge_ids: tuple[int, ...]         # base edge ids of the routing graph
    v_star: int                       # leader, a base vertex
    sources: tuple[int, ...]          # vertices delivering deg(v) tags here
    rounds: int                       # one full forward execution of the method
    detail: dict = field(default_factory=dict)


@dataclass
class EDTDecomposition:
    clusters: tuple[frozenset[int], ...]
    leaders: tuple[int, ...]
    groups: list[RoutingGroup]
    group_of_cluster: tuple[int, ...]
    batches: tuple[tuple[int, ...], ...]
    eps_measured: Fraction
    d_measured: int
    t_measured: int
    payload_bits: dict[int, int] = field(default_factory=dict)
    kind: str = "trivial"
    trace: list[dict] = field(default_factory=list)
    charged_rounds: int = 0
    old_layout: dict | None = None  # merged decompositions keep the previous
                                    # schedule for composite-method replay

    def group_window(self, gi: int) -> tuple[int, int]:
        """(start round, length) of group gi's forward execution slot."""
        start = 0
        for batch in self.batches:
            width = max((self.groups[j].rounds for j in batch), default=0)
            if gi in batch:
                return start, self.groups[gi].rounds
            start += width
        raise KeyError(f"group {gi} not scheduled")

    def cluster_of_vertex(self) -> dict[int, int]:
        owner = {}
        for k, c in enumerate(self.clusters):
            for v in c:
                owner[v] = k
        return owner

    def to_json(self) -> str:
        clusters = []
        for k, c in enumerate(self.clusters):
            gi = self.group_of_cluster[k]
            clusters.append({
                "members": sorted(c),
                "leader": int(self.leaders[k]),
                "method": self.groups[gi].kind,
                "T": int(self.groups[gi].rounds),
            })
        return json.dumps({
            "clusters": clusters,
            "eps_measured": f"{self.eps_measured.numerator}/{self.eps_measured.denominator}",
            "D_measured": int(self.d_measured),
            "T_measured": int(self.t_measured),
            "kind": self.kind,
        }, sort_keys=True)

    def trace_csv(self) -> str:
        lines = ["iter,eps,D,T,charged_rounds"]
        for row in self.trace:
            lines.append(f"{row['iter']},{row['eps']},{row['D']},{row['T']},"
                         f"{row['charged_rounds']}")
        return "\n".join(lines) + "\n"


def _batch_groups(groups: Sequence[RoutingGroup]) -> tuple[tuple[int, ...], ...]:
    """Greedy serialization of groups whose routing graphs share an edge."""
    batches: list[list[int]] = []
    used: list[set[int]] = []
    for gi, grp in enumerate(groups):
        es = set(grp.edge_ids)
        placed = False
        for b, eb in zip(batches, used):
            if not (es & eb):
                b.append(gi)
                eb |= es
                placed = True
                break
        if not placed:
            batches.append([gi])
            used.append(set(es))
    return tuple(tuple(b) for b in batches)


def _t_measured(groups, batches) -> int:
    return sum(max((groups[j].rounds for j in batch), default=0)
               for batch in batches)


def measured_fraction(g: Graph, clusters: Iterable[Iterable[int]]) -> Fraction:
    return inter_cluster_fraction(g, clusters)


def measured_diameter(g: Graph, clusters: Iterable[Iterable[int]]) -> int:
    best = 0
    for c in clusters:
        d = diameter_of_induced(g, c)
        if d == math.inf:
            raise ValueError("cluster induces a disconnected subgraph")
        best = max(best, int(d))
    return best


def trivial_edt(g: Graph) -> EDTDecomposition:
    """The starting decomposition: every vertex its own cluster and leader."""
    groups = [RoutingGroup(kind="trivial", vertices=(v,), edge_ids=(),
                           v_star=v, sources=(v,), rounds=0)
              for v in range(g.n)]
    clusters = tuple(frozenset([v]) for v in range(g.n))
    return EDTDecomposition(
        clusters=clusters, leaders=tuple(range(g.n)), groups=groups,
        group_of_cluster=tuple(range(g.n)), batches=(tuple(range(g.n)),),
        eps_measured=measured_fraction(g, clusters), d_measured=0, t_measured=0,
        kind="trivial")


# -- routing graph helper -----------------------------------------------------

@dataclass
class RoutingGraphView:
    sub: Graph
    order: list[int]                  # local -> base vertex
    base_edges: list[int]             # local edge -> base edge
    to_local: dict[int, int]

    @classmethod
    def from_edges(cls, g: Graph, edge_ids: Iterable[int],
                   extra_vertices: Iterable[int]) -> "RoutingGraphView":
        idx = sorted(set(int(i) for i in edge_ids))
        verts = set(int(v) for v in extra_vertices)
        for i in idx:
            u, v = g.edges[i]
            verts.update((u, v))
        order = sorted(verts)
        pos = {v: i for i, v in enumerate(order)}
        es = [(pos[g.edges[i][0]], pos[g.edges[i][1]]) for i in idx]
        sub = Graph(len(order), es, ids=[g.ids[v] for v in order])
        return cls(sub=sub, order=order, base_edges=idx, to_local=pos)

    def pick_leader(self) -> int:
        """Max-degree vertex, ties to the smallest base index; local index."""
        degs = self.sub.degrees
        best = max(range(self.sub.n), key=lambda v: (int(degs[v]), -self.order[v]))
        return best


# -- balance method -----------------------------------------------------------

def _build_balance_bundle(g: Graph, view: RoutingGraphView, sources: list[int],
                          tag_ctx: TagContext, f: Fraction, phi_hat,
                          charged: bool, exec_cap: int = EXEC_CAP):
    """Executions moving every source's deg_G(v) tags to the leader.

    Returns (execs, rounds, failed_sources); a failed source is one whose
    tags could not be completed within the execution cap (the caller
    demotes it to a singleton and rebuilds).
    """
    v_star = view.pick_leader()
    remaining = {v: list(tag_ctx.tags_of(v)) for v in sources}
    execs = []
    rounds = 0
    failed: set[int] = set()
    while any(remaining.values()):
        if len(execs) >= exec_cap:
            failed = {v for v, rest in remaining.items() if rest}
            break
        batch: list[list[int]] = [[] for _ in range(view.sub.n)]
        for v in sorted(remaining):
            cap_v = view.sub.degree(view.to_local[v])
            take = remaining[v][:cap_v]
            batch[view.to_local[v]] = take
        try:
            out = gather_by_balancing(view.sub, v_star, batch, f,
                                      phi_hat=phi_hat, charged=charged,
                                      capture_moves=not charged)
        except GatherProgressError as exc:
            failed = {v for v, rest in remaining.items() if rest}
            break
        delivered_tags = {t for _, t in out.delivered}
        for v in list(remaining):
            remaining[v] = [t for t in remaining[v] if t not in delivered_tags]
        execs.append({"batch": {v: batch[view.to_local[v]] for v in sorted(remaining)
                                if batch[view.to_local[v]]},
                      "outcome": out})
        rounds += out.rounds_used
    return execs, rounds, failed


def _make_balance_group(g: Graph, view: RoutingGraphView, sources: list[int],
                        tag_ctx: TagContext, f: Fraction, phi_hat,
                        charged: bool) -> tuple[RoutingGroup, set[int]]:
    srcs = sorted(sources)
    while True:
        execs, rounds, failed = _build_balance_bundle(
            g, view, srcs, tag_ctx, f, phi_hat, charged)
        if not failed:
            break
        srcs = [v for v in srcs if v not in failed]
    leader = view.order[view.pick_leader()]
    grp = RoutingGroup(kind="balance",
                       vertices=tuple(view.order),
                       edge_ids=tuple(view.base_edges),
                       v_star=leader, sources=tuple(srcs), rounds=rounds,
                       detail={"f": f, "phi_hat": phi_hat, "execs": execs,
                               "charged": charged})
    return grp, set(sources) - set(srcs)


# -- walk method ----------------------------------------------------------------

def _make_walk_group(g: Graph, view: RoutingGraphView, sources: list[int],
                     tag_ctx: TagContext, f: Fraction, schedule: WalkSchedule,
                     exec_cap: int = EXEC_CAP) -> tuple[RoutingGroup, set[int]]:
    """Execution bundle reusing one shared schedule."""
    v_star = view.pick_leader()
    srcs = sorted(sources)
    while True:
        remaining = {v: list(tag_ctx.tags_of(v)) for v in srcs}
        execs = []
        rounds = 0
        failed: set[int] = set()
        while any(remaining.values()):
            if len(execs) >= exec_cap:
                failed = {v for v, rest in remaining.items() if rest}
                break
            batch: list[list[int]] = [[] for _ in range(view.sub.n)]
            for v in sorted(remaining):
                cap_v = view.sub.degree(view.to_local[v])
                batch[view.to_local[v]] = remaining[v][:cap_v]
            base = [tag_ctx.slot_base_of(view.order[lv]) for lv in range(view.sub.n)]
            inst = WalkInstance.build(view.sub, v_star, batch, d=schedule.d,
                                      slot_key_base=base)
            run = simulate_walks([inst], schedule, keep_history=True)
            delivered = set(run.delivered_tags)
            # the leader's own slots hold their tags already
            delivered.update(batch[v_star])
            if not delivered & {t for v in remaining for t in remaining[v]}:
                failed = {v for v, rest in remaining.items() if rest}
                break
            for v in list(remaining):
                remaining[v] = [t for t in remaining[v] if t not in delivered]
            execs.append({"batch": {v: [t for t in batch[view.to_local[v]]]
                                    for v in sorted(remaining)
                                    if batch[view.to_local[v]]},
                          "run": run, "instance": inst})
            rounds += 2 * 3 * schedule.r * schedule.tau
        if not failed:
            break
        srcs = [v for v in srcs if v not in failed]
    grp = RoutingGroup(kind="walk",
                       vertices=tuple(view.order),
                       edge_ids=tuple(view.base_edges),
                       v_star=view.order[v_star], sources=tuple(srcs),
                       rounds=rounds,
                       detail={"f": f, "schedule": schedule, "execs": execs})
    return grp, set(sources) - set(srcs)

# -- construction from an overlapping expander decomposition -------------------

def build_edt_overlap(g: Graph, oc: OverlapClustering, eps: Fraction,
                      phi_hint=None, c: int | None = None,
                      charged: bool = False, r_chop: int = 3,
                      tag_ctx: TagContext | None = None) -> EDTDecomposition:
    """Three-stage construction over an overlapping expander decomposition:
    demote members holding under a quarter of their degree inside their
    supergraph, prune vertices the balancing run leaves underserved, then
    band-chop every cluster to low diameter.  The routing method is the
    balancing bundle of each original cluster's supergraph; pieces cut
    from one cluster share its leader."""
    eps = Fraction(eps)
    tag_ctx = tag_ctx or TagContext.for_graph(g)
    if c is None:
        c = max(1, oc.max_overlap(g))
    f = eps / (16 * (c + 1))
    if f >= Fraction(1, 2):
        f = Fraction(1, 3)

    # step 1: demote weakly attached members
    clusters = [set(s) for s in oc.clusters]
    gs = [set(e) for e in oc.gs_edges]
    singles: list[int] = []
    for i, s in enumerate(list(clusters)):
        if len(s) <= 1:
            continue
        for u in sorted(s):
            if oc.gs_degree(g, i, u) * 4 <= g.degree(u):
                clusters[i].discard(u)
                singles.append(u)

    # step 2: one balancing run per cluster defines the underserved set F_S
    f_s_all: list[int] = []
    views: dict[int, RoutingGraphView] = {}
    for i, s in enumerate(clusters):
        if len(s) <= 1:
            continue
        view = RoutingGraphView.from_edges(g, gs[i], s)
        views[i] = view
        probe = [[] for _ in range(view.sub.n)]
        base = 0
        for lv in range(view.sub.n):
            d = view.sub.degree(lv)
            probe[lv] = list(range(-(base + d), -base))  # synthetic tags
            base += d
        phi_use = phi_hint if phi_hint is not None else conductance_estimate(view.sub)
        if Fraction(phi_use) <= 0:
            phi_use = Fraction(1, max(2, 2 * view.sub.m))
        out = gather_by_balancing(view.sub, view.pick_leader(), probe, f,
                                  phi_hat=phi_use, charged=charged)
        for lv, miss in out.undelivered_by_vertex.items():
            v = view.order[lv]
            if v in s and 2 * miss >= view.sub.degree(lv):
                f_s_all.append(v)
    for v in f_s_all:
        for s in clusters:
            s.discard(v)

    # step 3: low-diameter chop inside every cluster
    piece_lists: list[tuple[list[frozenset[int]], int]] = []  # (pieces, cluster idx)
    for i, s in enumerate(clusters):
        if not s:
            continue
        if len(s) == 1:
            piece_lists.append(([frozenset(s)], i))
            continue
        pieces = ldd_sequential(g, eps / 4, r_chop=r_chop, within=s)
        piece_lists.append((pieces, i))
    for v in singles + f_s_all:
        piece_lists.append(([frozenset([v])], -1))

    # build groups: one balance bundle per surviving multi-vertex cluster
    groups: list[RoutingGroup] = []
    final_clusters: list[frozenset[int]] = []
    leaders: list[int] = []
    group_of_cluster: list[int] = []
    demoted_extra: list[int] = []
    for pieces, i in piece_lists:
        if i >= 0 and sum(len(p) for p in pieces) > 1:
            view = views.get(i)
            if view is None:
                view = RoutingGraphView.from_edges(g, gs[i], clusters[i])
            sources = sorted(v for p in pieces for v in p)
            phi_use = phi_hint if phi_hint is not None else conductance_estimate(view.sub)
            if Fraction(phi_use) <= 0:
                phi_use = Fraction(1, max(2, 2 * view.sub.m))
            grp, demoted = _make_balance_group(g, view, sources, tag_ctx, f,
                                               phi_use, charged)
            demoted_extra.extend(sorted(demoted))
            gi = len(groups)
            groups.append(grp)
            for p in pieces:
                kept = frozenset(v for v in p if v not in demoted)
                if not kept:
                    continue
                final_clusters.append(kept)
                leaders.append(grp.v_star)
                group_of_cluster.append(gi)
        else:
            for p in pieces:
                for v in sorted(p):
                    gi = len(groups)
                    groups.append(RoutingGroup(kind="trivial", vertices=(v,),
                                               edge_ids=(), v_star=v,
                                               sources=(v,), rounds=0))
                    final_clusters.append(frozenset([v]))
                    leaders.append(v)
                    group_of_cluster.append(gi)
    for v in demoted_extra:
        gi = len(groups)
        groups.append(RoutingGroup(kind="trivial", vertices=(v,), edge_ids=(),
                                   v_star=v, sources=(v,), rounds=0))
        final_clusters.append(frozenset([v]))
        leaders.append(v)
        group_of_cluster.append(gi)

    batches = _batch_groups(groups)
    payload_bits = {}
    for gi, grp in enumerate(groups):
        if grp.kind != "balance":
            continue
        for v in grp.vertices:
            inc = sum(1 for e in grp.edge_ids
                      if v in g.edges[e][:2])
            payload_bits[v] = payload_bits.get(v, 0) + 64 * (2 + inc)
    edt = EDTDecomposition(
        clusters=tuple(final_clusters), leaders=tuple(leaders), groups=groups,
        group_of_cluster=tuple(group_of_cluster), batches=batches,
        eps_measured=measured_fraction(g, final_clusters),
        d_measured=measured_diameter(g, final_clusters),
        t_measured=_t_measured(groups, batches),
        payload_bits=payload_bits, kind="overlap")
    return edt


# -- construction from a plain expander decomposition ---------------------------

def build_edt_plain(g: Graph, partition: Sequence[Iterable[int]], eps: Fraction,
                    r_chop: int = 3, schedule_seed_cap: int = 4096,
                    tag_ctx: TagContext | None = None) -> EDTDecomposition:
    """Same three-stage shape over a plain partition, with one shared walk
    schedule serving every multi-vertex cluster; the first payload part
    (the schedule string) is identical across vertices."""
    eps = Fraction(eps)
    tag_ctx = tag_ctx or TagContext.for_graph(g)
    f = eps / 16
    if f >= Fraction(1, 2):
        f = Fraction(1, 3)

    clusters = [set(s) for s in partition]
    singles: list[int] = []
    # step 1 on induced subgraphs
    views: dict[int, RoutingGraphView] = {}
    for i, s in enumerate(list(clusters)):
        if len(s) <= 1:
            continue
        sub, order, emap = g.induced_subgraph_with_edges(s)
        local_deg = {order[lv]: sub.degree(lv) for lv in range(sub.n)}
        for u in sorted(s):
            if local_deg[u] * 4 <= g.degree(u):
                clusters[i].discard(u)
                singles.append(u)
        if len(clusters[i]) > 1:
            sub2, order2, emap2 = g.induced_subgraph_with_edges(clusters[i])
            views[i] = RoutingGraphView(sub=sub2, order=order2, base_edges=emap2,
                                        to_local={v: j for j, v in enumerate(order2)})

    # step 2: one shared schedule for all multi-vertex clusters
    specs = []
    spec_idx = []
    for i, view in sorted(views.items()):
        probe = [[] for _ in range(view.sub.n)]
        base = 0
        for lv in range(view.sub.n):
            d = view.sub.degree(lv)
            probe[lv] = [tag_ctx.probe_base + base + j for j in range(d)]
            base += d
        specs.append((view.sub, view.pick_leader(), probe))
        spec_idx.append(i)
    f_s_all: list[int] = []
    schedule = None
    if specs:
        key_bases = []
        for i in spec_idx:
            view = views[i]
            key_bases.append([tag_ctx.slot_base_of(view.order[lv])
                              for lv in range(view.sub.n)])
        schedule, run = synthesize_shared_schedule(
            [(sub, vs, pb) for sub, vs, pb in specs], f,
            seed_cap=schedule_seed_cap, slot_key_bases=key_bases)
        for (sub, vs, probe), i, base in zip(specs, spec_idx, key_bases):
            view = views[i]
            inst = WalkInstance.build(sub, vs, probe, d=schedule.d,
                                      slot_key_base=base)
            local_run = simulate_walks([inst], schedule)
            got = local_run.delivered_tags
            for lv in range(sub.n):
                mine = set(probe[lv])
                miss = len(mine) - len(mine & got) if lv != vs else 0
                v = view.order[lv]
                if v in clusters[i] and 2 * miss >= sub.degree(lv):
                    f_s_all.append(v)
    for v in f_s_all:
        for s in clusters:
            s.discard(v)

    # step 3 + groups; the routing graph stays the step-2 subgraph, with the
    # pruned vertices kept as forwarders
    groups: list[RoutingGroup] = []
    final_clusters: list[frozenset[int]] = []
    leaders: list[int] = []
    group_of_cluster: list[int] = []
    demoted_extra: list[int] = []
    for i, s in enumerate(clusters):
        if not s:
            continue
        if len(s) == 1 or i not in views:
            singles.extend(sorted(s))
            s.clear()
            continue
        view = views[i]
        pieces = ldd_sequential(g, eps / 4, r_chop=r_chop, within=s)
        sources = sorted(v for p in pieces for v in p)
        grp, demoted = _make_walk_group(g, view, sources, tag_ctx, f, schedule)
        demoted_extra.extend(sorted(demoted))
        gi = len(groups)
        groups.append(grp)
        for p in pieces:
            kept = frozenset(v for v in p if v not in demoted)
            if not kept:
                continue
            final_clusters.append(kept)
            leaders.append(grp.v_star)
            group_of_cluster.append(gi)
    for v in sorted(set(singles + f_s_all + demoted_extra)):
        gi = len(groups)
        groups.append(RoutingGroup(kind="trivial", vertices=(v,), edge_ids=(),
                                   v_star=v, sources=(v,), rounds=0))
        final_clusters.append(frozenset([v]))
        leaders.append(v)
        group_of_cluster.append(gi)

    batches = _batch_groups(groups)
    payload_bits = {}
    part1 = 64 * schedule.hash.k if schedule is not None else 0
    for grp in groups:
        if grp.kind != "walk":
            continue
        for v in grp.vertices:
            payload_bits[v] = part1 + 128  # shared schedule + cluster/leader ids
    edt = EDTDecomposition(
        clusters=tuple(final_clusters), leaders=tuple(leaders), groups=groups,
        group_of_cluster=tuple(group_of_cluster), batches=batches,
        eps_measured=measured_fraction(g, final_clusters),
        d_measured=measured_diameter(g, final_clusters),
        t_measured=_t_measured(groups, batches),
        payload_bits=payload_bits, kind="plain")
    return edt

# -- star merging over an existing decomposition --------------------------------

def edt_merge_step(g: Graph, edt: EDTDecomposition, alpha: int) -> EDTDecomposition:
    """Heavy-stars merge: clusters joined by heavy links fold into their star
    center, keeping the center's leader.  The composed routing method runs
    the old method once to the member leaders, redistributes along crossing
    links, ships across them, and gathers at the center; every phase length
    comes out of the recorded plans.

    Light links (below eps/(32*alpha) of the member's volume, eps being the
    measured inter-cluster fraction) leave their star first, so the merge
    removes a 1/(16*alpha) share of the crossing edges.  The new diameter
    is at most 3D+2."""
    frac = measured_fraction(g, edt.clusters)
    if frac == 0:
        return edt
    wcg = cluster_graph_from_partition(g, edt.clusters, with_diameters=False)
    report = heavy_stars(wcg, alpha)
    stars = report.stars

    owner = edt.cluster_of_vertex()
    crossing: dict[tuple[int, int], list[int]] = {}
    for ei, (u, v) in enumerate(g.edges):
        if u == v:
            continue
        a, b = owner[u], owner[v]
        if a != b:
            crossing.setdefault((min(a, b), max(a, b)), []).append(ei)

    def link(a: int, b: int) -> list[int]:
        return crossing.get((min(a, b), max(a, b)), [])

    members_by_center: dict[int, list[int]] = {}
    for node, center in stars.assignment.items():
        if node != center:
            members_by_center.setdefault(center, []).append(node)

    # light-link removal (volumes in the base graph)
    tag_space = TagSpace(g)
    merged_defs: list[tuple[int, list[int]]] = []
    for center in sorted(members_by_center):
        kept = []
        for s_idx in sorted(members_by_center[center]):
            vol_s = sum(g.degree(v) for v in edt.clusters[s_idx])
            if Fraction(len(link(s_idx, center))) * 32 * alpha <= frac * vol_s:
                continue
            kept.append(s_idx)
        if kept:
            merged_defs.append((center, kept))

    t_old = edt.t_measured
    new_clusters: list[frozenset[int]] = []
    new_leaders: list[int] = []
    new_groups: list[RoutingGroup] = []
    group_of_cluster: list[int] = []
    absorbed: set[int] = set()
    r2_global = 0
    q3_global = 0
    r4_global = 0

    for center, kept in merged_defs:
        part = [center] + kept
        absorbed.update(part)
        verts = frozenset(v for i in part for v in edt.clusters[i])
        center_leader = edt.leaders[center]
        center_set = edt.clusters[center]

        redistribution: dict[int, list[int]] = {}
        crossing_q: dict[int, list[int]] = {}
        for s_idx in kept:
            if edt.leaders[s_idx] == center_leader:
                continue  # member already gathers at the merged leader
            tags_s: list[int] = []
            for v in sorted(edt.clusters[s_idx]):
                tags_s.extend(tag_space.tags_of(v))
            carriers = []
            for v in sorted(edt.clusters[s_idx]):
                edges_v = [ei for ei in link(s_idx, center)
                           if v in g.edges[ei][:2]]
                if edges_v:
                    carriers.append((v, sorted(edges_v)))
            total_w = sum(len(es) for _, es in carriers)
            pos = 0
            for v, es in carriers:
                quota = math.ceil(len(tags_s) * len(es) / total_w)
                mine = tags_s[pos:pos + quota]
                pos += len(mine)
                if not mine:
                    continue
                redistribution.setdefault(v, []).extend(mine)
                for j, t in enumerate(mine):
                    crossing_q.setdefault(es[j % len(es)], []).append(t)
                r2_global = max(r2_global, math.ceil(len(mine) / max(1, g.degree(v))))
        q3_star = max((len(q) for q in crossing_q.values()), default=0)
        q3_global = max(q3_global, q3_star)
        arrivals: dict[int, int] = {}
        for ei, q in crossing_q.items():
            u, v = g.edges[ei]
            w = u if u in center_set else v
            if w != center_leader:
                arrivals[w] = arrivals.get(w, 0) + len(q)
        for w, cnt in arrivals.items():
            r4_global = max(r4_global, math.ceil(cnt / max(1, g.degree(w))))

        member_groups = sorted({edt.group_of_cluster[i] for i in part})
        edge_union: set[int] = set()
        vert_union: set[int] = set()
        for gi in member_groups:
            edge_union |= set(edt.groups[gi].edge_ids)
            vert_union |= set(edt.groups[gi].vertices)
        for a in part:
            for b in part:
                if a < b:
                    edge_union.update(link(a, b))
        vert_union |= verts
        detail = {
            "members": [
                {"cluster": tuple(sorted(edt.clusters[i])),
                 "leader": edt.leaders[i],
                 "group_index": edt.group_of_cluster[i]} for i in kept],
            "center": {"cluster": tuple(sorted(center_set)),
                       "leader": center_leader,
                       "group_index": edt.group_of_cluster[center]},
            "redistribution": {v: list(ts) for v, ts in sorted(redistribution.items())},
            "crossing": {ei: list(q) for ei, q in sorted(crossing_q.items())},
            "t_old": t_old,
            "_old_layout": {"groups": edt.groups, "batches": edt.batches,
                            "t_old": t_old},
        }
        gi_new = len(new_groups)
        new_groups.append(RoutingGroup(
            kind="merged", vertices=tuple(sorted(vert_union)),
            edge_ids=tuple(sorted(edge_union)), v_star=center_leader,
            sources=tuple(sorted(verts)), rounds=0, detail=detail))
        new_clusters.append(verts)
        new_leaders.append(center_leader)
        group_of_cluster.append(gi_new)

    for i, c in enumerate(edt.clusters):
        if i in absorbed:
            continue
        gi_old = edt.group_of_cluster[i]
        grp = edt.groups[gi_old]
        gi_new = len(new_groups)
        new_groups.append(grp)
        new_clusters.append(c)
        new_leaders.append(edt.leaders[i])
        group_of_cluster.append(gi_new)

    t_total = t_old * (1 + r2_global + r4_global) + q3_global
    for grp in new_groups:
        if grp.kind == "merged":
            grp.rounds = t_total
            grp.detail["r2"] = r2_global
            grp.detail["q3"] = q3_global
            grp.detail["r4"] = r4_global

    new = EDTDecomposition(
        clusters=tuple(new_clusters), leaders=tuple(new_leaders),
        groups=new_groups, group_of_cluster=tuple(group_of_cluster),
        batches=(tuple(range(len(new_groups))),),
        eps_measured=measured_fraction(g, new_clusters),
        d_measured=measured_diameter(g, new_clusters),
        t_measured=t_total, kind="merged",
        payload_bits=dict(edt.payload_bits), trace=list(edt.trace),
        # the old layout replays phase 1 of the composite method
        old_layout={"groups": edt.groups, "batches": edt.batches,
                    "group_of_cluster": edt.group_of_cluster,
                    "clusters": edt.clusters, "leaders": edt.leaders,
                    "t_old": t_old})
    new.charged_rounds = edt.charged_rounds
    return new


# -- leader-local improvement ----------------------------------------------------

def _improve_common(g: Graph, edt: EDTDecomposition, alpha: int,
                    local_builder, kind: str) -> EDTDecomposition:
    frac = measured_fraction(g, edt.clusters)
    if frac == 0:
        raise ValueError("nothing to improve: no inter-cluster edges")
    eps_star = frac / (32 * alpha)
    global_tags = TagSpace(g)

    new_clusters: list[frozenset[int]] = []
    new_leaders: list[int] = []
    new_groups: list[RoutingGroup] = []
    group_of_cluster: list[int] = []
    payload_bits: dict[int, int] = {}
    gather_cost = 0

    for i, s in enumerate(edt.clusters):
        if len(s) == 1:
            v = min(s)
            gi = len(new_groups)
            new_groups.append(RoutingGroup(kind="trivial", vertices=(v,),
                                           edge_ids=(), v_star=v, sources=(v,),
                                           rounds=0))
            new_clusters.append(frozenset([v]))
            new_leaders.append(v)
            group_of_cluster.append(gi)
            continue
        local_g, order, emap = g.induced_subgraph_with_edges(s)
        tag_ctx = TagContext.mapped(global_tags, order)
        local_edt = local_builder(local_g, eps_star, tag_ctx)
        gather_cost += edt.groups[edt.group_of_cluster[i]].rounds
        remap: dict[int, int] = {}
        for gi_local, grp in enumerate(local_edt.groups):
            mapped = RoutingGroup(
                kind=grp.kind,
                vertices=tuple(order[v] for v in grp.vertices),
                edge_ids=tuple(emap[e] for e in grp.edge_ids),
                v_star=order[grp.v_star],
                sources=tuple(order[v] for v in grp.sources),
                rounds=grp.rounds,
                detail=_map_detail(grp, order, emap))
            remap[gi_local] = len(new_groups)
            new_groups.append(mapped)
        for k, lc in enumerate(local_edt.clusters):
            new_clusters.append(frozenset(order[v] for v in lc))
            new_leaders.append(order[local_edt.leaders[k]])
            group_of_cluster.append(remap[local_edt.group_of_cluster[k]])
        for v, bits in local_edt.payload_bits.items():
            payload_bits[order[v]] = bits

    batches = _batch_groups(new_groups)
    new = EDTDecomposition(
        clusters=tuple(new_clusters), leaders=tuple(new_leaders),
        groups=new_groups, group_of_cluster=tuple(group_of_cluster),
        batches=batches,
        eps_measured=measured_fraction(g, new_clusters),
        d_measured=measured_diameter(g, new_clusters),
        t_measured=_t_measured(new_groups, batches),
        payload_bits=payload_bits, kind=kind, trace=list(edt.trace))
    new.charged_rounds = edt.charged_rounds + gather_cost
    return new


def _map_detail(grp: RoutingGroup, order, emap) -> dict:
    """Translate local vertex/edge references in a method detail to base ids.

    Balance and walk details carry batches keyed by local vertices; plans
    and schedules are index-free except for captured moves (vertex pairs in
    the routing subgraph's own numbering, remapped lazily by the verifier
    through the group's vertex tuple, so nothing to do there)."""
    detail = dict(grp.detail)
    if grp.kind in ("balance", "walk"):
        execs = []
        for ex in detail.get("execs", ()):
            ex2 = dict(ex)
            ex2["batch"] = {order[v]: list(ts) for v, ts in ex["batch"].items()}
            execs.append(ex2)
        detail["execs"] = execs
    return detail


def edt_improve_a(g: Graph, edt: EDTDecomposition, alpha: int,
                  charged: bool = False) -> EDTDecomposition:
    """Rebuild every cluster with the overlap-decomposition construction at
    eps*/4 = measured/(128*alpha); leaders compute locally, so the cost is
    one topology gather per cluster plus the dissemination of the payloads."""
    def builder(local_g, eps_star, tag_ctx):
        res = overlap_expander_decomposition(local_g, eps_star / 4, alpha)
        return build_edt_overlap(local_g, res.clustering, eps_star,
                                 c=max(1, res.overlap), charged=charged,
                                 tag_ctx=tag_ctx)
    return _improve_common(g, edt, alpha, builder, "overlap")


def edt_improve_b(g: Graph, edt: EDTDecomposition, alpha: int,
                  schedule_seed_cap: int = 4096) -> EDTDecomposition:
    """Rebuild with the plain construction: sequential minor-free expander
    decomposition plus one shared walk schedule per cluster."""
    def builder(local_g, eps_star, tag_ctx):
        dec = seq_expander_decomposition_minorfree(local_g, eps_star / 4)
        return build_edt_plain(local_g, dec.pieces, eps_star,
                               schedule_seed_cap=schedule_seed_cap,
                               tag_ctx=tag_ctx)
    return _improve_common(g, edt, alpha, builder, "plain")


# -- the pipeline ---------------------------------------------------------------

def edt_pipeline(g: Graph, eps: Fraction, variant: str = "A", alpha: int = 3,
                 charged: bool = False, iteration_cap: int | None = None) -> EDTDecomposition:
    """Alternate star merges with leader-local rebuilds until the measured
    inter-cluster fraction reaches eps.

    Merging is aimed at eps/(1+1/(32*alpha)) so that the closing rebuild
    (which can raise the fraction by that factor) still lands at eps; a run
    whose fraction hits zero stops right after the merge.  The trace logs
    (fraction, diameter, T, charged rounds) per step."""
    eps = Fraction(eps)
    if not (0 < eps < Fraction(1, 2)):
        raise ValueError("eps must lie in (0, 1/2)")
    if variant not in ("A", "B"):
        raise ValueError("variant must be 'A' or 'B'")
    if variant == "B" and charged:
        raise ValueError("the walk variant runs at message scale only")
    decay = 1 - Fraction(1, 16 * alpha)
    if iteration_cap is None:
        iteration_cap = max(1, math.ceil(math.log(1 / eps) / -math.log(float(decay)))) + 2

    pre_target = eps / (1 + Fraction(1, 32 * alpha))
    edt = trivial_edt(g)
    _log(edt, 0)
    if edt.eps_measured <= eps:
        return edt
    for it in range(1, iteration_cap + 1):
        edt = edt_merge_step(g, edt, alpha)
        _log(edt, it)
        if edt.eps_measured == 0:
            return edt
        if edt.eps_measured <= pre_target:
            edt = (edt_improve_a(g, edt, alpha, charged=charged)
                   if variant == "A" else edt_improve_b(g, edt, alpha))
            _log(edt, it)
            if edt.eps_measured <= eps:
                return edt
            continue
        edt = (edt_improve_a(g, edt, alpha, charged=charged)
               if variant == "A" else edt_improve_b(g, edt, alpha))
        _log(edt, it)
        if edt.eps_measured <= eps:
            return edt
    raise DecompositionError(
        f"pipeline did not reach eps={eps} within {iteration_cap} iterations; "
        f"trace={[(r['iter'], r['eps']) for r in edt.trace]}")


def _log(edt: EDTDecomposition, iteration: int) -> None:
    edt.trace.append({"iter": iteration,
                      "eps": float(edt.eps_measured),
                      "D": edt.d_measured,
                      "T": edt.t_measured,
                      "charged_rounds": edt.charged_rounds})
