"""Decomposition verification, including message-level routing replay.

Every routing method deterministically expands into a move schedule: a
list of (round, src, dst, payload) message events on base-graph edges.
The replay program executes those sends inside the simulator under strict
bit budgets with a custody rule -- a node may only send payloads it
started with or has received -- so the routing checks really demonstrate
that the recorded plans move every vertex's tagged messages to its leader
and, running the schedule in reverse along each tag's reconstructed
delivery path, leader responses back out, all within the recorded round
budget.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .graph import Graph
from .measures import diameter_of_induced
from .overlap import inter_cluster_fraction
from . import sim
from .edt import EDTDecomposition, RoutingGroup, TagSpace, RESPONSE_OFFSET

Move = tuple[int, int, int, int]  # round, src base vertex, dst base vertex, payload


class ReplayError(RuntimeError):
    pass


@dataclass
class MovePlan:
    moves: list[Move] = field(default_factory=list)
    length: int = 0


# -- move generation ------------------------------------------------------------

def _balance_exec_moves(grp: RoutingGroup, ex: dict, base_round: int,
                        out: MovePlan) -> int:
    outcome = ex["outcome"]
    plan = outcome.plan
    if plan is None:
        raise ReplayError("balance execution was built in charged mode")
    verts = grp.vertices
    d_used = plan.d_used
    r = base_round
    for phase in plan.phases:
        steps = sum(phase.segments)
        for step, a, b, tag in phase.moves:
            out.moves.append((r + 2 * step + 1, verts[a], verts[b], tag))
        for step, a, b, tag in reversed(phase.moves):
            out.moves.append((r + 2 * steps + (steps - 1 - step),
                              verts[b], verts[a], tag))
        r += 3 * steps + (len(phase.segments) + 1) * 2 * d_used
    return r - base_round


def _walk_exec_moves(grp: RoutingGroup, ex: dict, base_round: int,
                     out: MovePlan) -> int:
    run = ex["run"]
    inst = ex["instance"]
    sched = grp.detail["schedule"]
    r3 = 3 * sched.r
    tau = sched.tau
    verts = grp.vertices
    hist = run.positions_history
    fwd: list[tuple[int, int, int, int, int]] = []
    queues: dict[tuple[int, int, int], int] = {}
    for t in range(tau):
        before, after = hist[t], hist[t + 1]
        moved = np.nonzero((before >= 0) & (after >= 0) & (before != after))[0]
        for w in moved:
            sa, sb = int(before[w]), int(after[w])
            a, b = inst.slot_owner[sa], inst.slot_owner[sb]
            if a == b:
                continue  # gadget-internal hop, no message
            key = (t, min(sa, sb), max(sa, sb))
            qidx = queues.get(key, 0)
            queues[key] = qidx + 1
            if qidx >= r3:
                raise ReplayError("per-step edge queue exceeded 3r")
            fwd.append((t, qidx, a, b, int(run.walk_tags[w])))
    for t, q, a, b, tag in fwd:
        out.moves.append((base_round + t * r3 + q, verts[a], verts[b], tag))
    flen = r3 * tau
    for t, q, a, b, tag in fwd:
        out.moves.append((base_round + flen + (tau - 1 - t) * r3 + q,
                          verts[b], verts[a], tag))
    return 2 * flen


def group_forward_plan(g: Graph, grp: RoutingGroup, base_round: int) -> MovePlan:
    """Moves of one full forward execution of the group's method."""
    out = MovePlan()
    if grp.kind == "trivial":
        return out
    if grp.kind == "balance":
        r = base_round
        for ex in grp.detail["execs"]:
            r += _balance_exec_moves(grp, ex, r, out)
        out.length = r - base_round
        return out
    if grp.kind == "walk":
        r = base_round
        for ex in grp.detail["execs"]:
            r += _walk_exec_moves(grp, ex, r, out)
        out.length = r - base_round
        return out
    if grp.kind == "merged":
        raise ReplayError("merged methods replay at decomposition level")
    raise ReplayError(f"unknown method kind {grp.kind}")


def _layout_windows(groups, batches) -> dict[int, int]:
    starts = {}
    base = 0
    for batch in batches:
        width = max((groups[j].rounds for j in batch), default=0)
        for j in batch:
            starts[j] = base
        base += width
    return starts


def _trace_path(tag_moves: list[Move], origin: int, target: int) -> list[Move]:
    """One custody-consistent chain carrying the tag from origin to target.

    tag_moves are all captured moves of this payload, any copies mixed;
    we take the earliest arrival at the target and walk receipts backward
    until the chain starts at the origin (which holds the tag throughout).
    """
    if origin == target:
        return []
    arrivals = [m for m in tag_moves if m[2] == target]
    if not arrivals:
        raise ReplayError(f"payload {tag_moves[0][3] if tag_moves else '?'} "
                          f"never reaches {target}")
    arrivals.sort()
    cur = arrivals[0]
    path = [cur]
    while cur[1] != origin:
        receipts = [m for m in tag_moves if m[2] == cur[1] and m[0] < cur[0]]
        if not receipts:
            raise ReplayError(f"broken custody chain for payload {cur[3]}")
        nxt = max(receipts)
        path.append(nxt)
        cur = nxt
    path.reverse()
    return path


def _paths_by_tag(plan: MovePlan, wanted: dict[int, tuple[int, int]]) -> dict[int, list[Move]]:
    """Delivery path per tag; wanted[tag] = (origin, target)."""
    by_tag: dict[int, list[Move]] = {}
    for mv in plan.moves:
        by_tag.setdefault(mv[3], []).append(mv)
    out = {}
    for tag, (origin, target) in wanted.items():
        out[tag] = _trace_path(by_tag.get(tag, []), origin, target)
    return out


def _merged_edt_plan(g: Graph, edt: EDTDecomposition) -> MovePlan:
    """Schedule of a merged decomposition: one full execution of the old
    layout (phase 1, serving unchanged clusters and member gathers alike),
    then per star the redistribution (flipped delivery paths), the
    crossing-edge shipping, and the center gathers (forward paths with
    substituted payloads).  Old-layout windows keep conflicting groups
    apart, and path moves are disjoint sub-schedules of the old timeline,
    so stars never contend for an edge slot."""
    layout = edt.old_layout
    old_groups = layout["groups"]
    t_old = layout["t_old"]
    starts = _layout_windows(old_groups, layout["batches"])
    ts = TagSpace(g)
    out = MovePlan(length=edt.t_measured)

    plans: dict[int, MovePlan] = {}
    for gi, grp in enumerate(old_groups):
        if grp.kind == "trivial":
            plans[gi] = MovePlan()
            continue
        sub = group_forward_plan(g, grp, 0)
        if sub.length > grp.rounds:
            raise ReplayError("old group plan exceeds its recorded rounds")
        plans[gi] = sub
        for rnd, a, b, payload in sub.moves:
            out.moves.append((starts[gi] + rnd, a, b, payload))

    for grp in edt.groups:
        if grp.kind != "merged":
            continue
        det = grp.detail
        r2, q3, r4 = det["r2"], det["q3"], det["r4"]
        center_leader = det["center"]["leader"]
        center_gi = det["center"]["group_index"]

        redistribution = det["redistribution"]
        chunk_of: dict[int, list[list[int]]] = {}
        for v, assigned in redistribution.items():
            cap = max(1, g.degree(v))
            chunk_of[v] = [assigned[i:i + cap]
                           for i in range(0, len(assigned), cap)]
        for m in det["members"]:
            gi = m["group_index"]
            leader = m["leader"]
            if leader == center_leader:
                continue
            carriers = [v for v in m["cluster"] if v in chunk_of]
            if not carriers:
                continue
            wanted = {}
            for v in carriers:
                for tag in ts.tags_of(v):
                    wanted[tag] = (v, leader)
            paths = _paths_by_tag(plans[gi], wanted)
            for v in carriers:
                own = ts.tags_of(v)
                for rep, chunk in enumerate(chunk_of[v]):
                    if rep >= r2:
                        raise ReplayError("redistribution chunk beyond budget")
                    rep_base = t_old * (1 + rep)
                    for own_tag, payload in zip(own, chunk):
                        for rnd, a, b, _ in paths[own_tag]:
                            flipped = rep_base + (t_old - 1 - (starts[gi] + rnd))
                            out.moves.append((flipped, b, a, payload))

        p3_base = t_old * (1 + r2)
        center_set = set(det["center"]["cluster"])
        arrivals: dict[int, list[int]] = {}
        for ei, queue in sorted(det["crossing"].items()):
            u, v = g.edges[ei]
            w = u if u in center_set else v
            src = v if w == u else u
            for q, tag in enumerate(queue):
                out.moves.append((p3_base + q, src, w, tag))
            if w != center_leader:
                arrivals.setdefault(w, []).extend(queue)

        p4_base = p3_base + q3
        if arrivals and r4 > 0:
            wanted = {}
            for w in arrivals:
                for tag in ts.tags_of(w):
                    wanted[tag] = (w, center_leader)
            paths = _paths_by_tag(plans[center_gi], wanted)
            for w, got in sorted(arrivals.items()):
                own = ts.tags_of(w)
                cap = max(1, len(own))
                for rep in range(math.ceil(len(got) / cap)):
                    if rep >= r4:
                        raise ReplayError("center gather beyond budget")
                    chunk = got[rep * cap:(rep + 1) * cap]
                    for own_tag, payload in zip(own, chunk):
                        for rnd, a, b, _ in paths[own_tag]:
                            out.moves.append((p4_base + rep * t_old
                                              + starts[center_gi] + rnd,
                                              a, b, payload))
    return out


# -- replay program ---------------------------------------------------------------

class MoveScheduleProgram:
    """Executes a precomputed send table under custody tracking.

    Nodes sleep between their scheduled rounds; every received payload is
    recorded, and sending a payload never granted nor received aborts the
    replay, so fabricated schedules cannot pass verification."""

    def __init__(self, sends: dict[int, dict[int, list[tuple[int, int]]]],
                 grants: dict[int, set[int]], horizon: int):
        self.sends = sends
        self.grants = grants
        self.horizon = horizon

    def initialize(self, ctx: sim.NodeContext):
        mine = self.sends.get(ctx.node, {})
        return {"node": ctx.node, "held": set(self.grants.get(ctx.node, ())),
                "got": set(), "mine": mine,
                "agenda": sorted(mine.keys(), reverse=True)}

    def step(self, st, rnd, inbox):
        for p, msg in inbox.items():
            st["got"].add(msg[0])
            st["held"].add(msg[0])
        out = {}
        for port, payload in st["mine"].get(rnd, ()):
            if payload not in st["held"]:
                raise ReplayError(
                    f"node {st['node']} sent payload {payload} it never held")
            out[port] = (payload,)
        agenda = st["agenda"]
        while agenda and agenda[-1] <= rnd:
            agenda.pop()
        if not agenda:
            if rnd >= self.horizon:
                return sim.StepResult(st, outbox=out, halted=True,
                                      output=sorted(st["got"]))
            return sim.StepResult(st, outbox=out, wake_at=self.horizon)
        return sim.StepResult(st, outbox=out, wake_at=agenda[-1])


def run_move_schedule(g: Graph, plan_moves: list[Move], grants: dict[int, set[int]],
                      horizon: int) -> dict[int, set[int]]:
    """Run all moves in the simulator (strict mode); per-vertex receipts."""
    sends: dict[int, dict[int, list[tuple[int, int]]]] = {}
    edge_index: dict[tuple[int, int], list[int]] = {}
    for ei, (u, v) in enumerate(g.edges):
        edge_index.setdefault((min(u, v), max(u, v)), []).append(ei)
    inc = g.incidence()
    port_of = [dict() for _ in range(g.n)]
    for v in range(g.n):
        for p, e in enumerate(inc[v]):
            port_of[v][e] = p
    used: set[tuple[int, int, int]] = set()
    for rnd, a, b, payload in sorted(plan_moves):
        cands = edge_index.get((min(a, b), max(a, b)))
        if not cands:
            raise ReplayError(f"no edge between {a} and {b}")
        ei = None
        for e in cands:  # parallel edges: first free slot this round
            if (rnd, e, a) not in used:
                ei = e
                break
        if ei is None:
            raise ReplayError(f"edge ({a},{b}) oversubscribed in round {rnd}")
        used.add((rnd, ei, a))
        sends.setdefault(a, {}).setdefault(rnd, []).append((port_of[a][ei], payload))
    prog = MoveScheduleProgram(sends, grants, horizon)
    cfg = sim.config_fitting(g.n, fields=1, max_rounds=horizon + 2)
    tr = sim.run(g, prog, cfg)
    if tr.rounds_used > horizon:
        raise ReplayError(f"replay used {tr.rounds_used} rounds > horizon {horizon}")
    got = {}
    for ident, out in tr.outputs.items():
        got[g.vertex_of_id(ident)] = set(out or ())
    return got


# -- verify_edt -------------------------------------------------------------------

def verify_edt(g: Graph, edt: EDTDecomposition, eps: Fraction, d_cap: int,
               check_routing: bool = True) -> dict:
    """Check (i) partition validity, (ii) inter-cluster fraction <= eps,
    (iii) induced diameters <= d_cap, (iv) message-level forward and
    reverse delivery within the recorded budget.  Never raises; each
    failed check carries a witness."""
    report: dict = {"checks": {}, "witnesses": {}}
    eps = Fraction(eps)

    seen: set[int] = set()
    ok = True
    for c in edt.clusters:
        if seen & c:
            ok = False
            report["witnesses"]["partition"] = \
                f"overlapping clusters at {sorted(seen & c)[:5]}"
            break
        seen |= c
    if ok and seen != set(range(g.n)):
        ok = False
        report["witnesses"]["partition"] = \
            f"uncovered vertices {sorted(set(range(g.n)) - seen)[:5]}"
    report["checks"]["partition"] = ok

    frac = inter_cluster_fraction(g, edt.clusters)
    report["measured_fraction"] = frac
    report["checks"]["fraction"] = frac <= eps
    if frac > eps:
        report["witnesses"]["fraction"] = f"measured {frac} > {eps}"

    diam = 0
    diam_ok = True
    for c in edt.clusters:
        d = diameter_of_induced(g, c)
        if d == math.inf:
            diam_ok = False
            report["witnesses"]["diameter"] = \
                f"cluster {sorted(c)[:5]}... induces a disconnected subgraph"
            break
        diam = max(diam, int(d))
    report["measured_diameter"] = diam
    report["checks"]["diameter"] = diam_ok and diam <= d_cap
    if diam_ok and diam > d_cap:
        report["witnesses"]["diameter"] = f"measured {diam} > cap {d_cap}"

    if not check_routing:
        report["checks"]["routing_forward"] = None
        report["checks"]["routing_reverse"] = None
        return report

    ts = TagSpace(g)
    try:
        fwd_got, rev_got, horizon = _replay_both(g, edt)
    except (ReplayError, sim.SimError) as exc:
        report["checks"]["routing_forward"] = False
        report["checks"]["routing_reverse"] = False
        report["witnesses"]["routing"] = str(exc)
        return report

    ok_f = True
    ok_r = True
    owner = edt.cluster_of_vertex()
    for v in range(g.n):
        leader = edt.leaders[owner[v]]
        expected = set(ts.tags_of(v))
        if not expected or v == leader:
            continue
        have = fwd_got.get(leader, set())
        if not expected <= have:
            ok_f = False
            report["witnesses"].setdefault(
                "routing_forward",
                f"leader {leader} missing tags of vertex {v}: "
                f"{sorted(expected - have)[:5]}")
        resp = {t + RESPONSE_OFFSET for t in expected}
        have_r = rev_got.get(v, set())
        if not resp <= have_r:
            ok_r = False
            report["witnesses"].setdefault(
                "routing_reverse",
                f"vertex {v} missing responses {sorted(resp - have_r)[:5]}")
    report["checks"]["routing_forward"] = ok_f
    report["checks"]["routing_reverse"] = ok_r
    report["replay_horizon"] = horizon
    report["t_recorded"] = edt.t_measured
    return report


def _replay_both(g: Graph, edt: EDTDecomposition):
    """Forward schedule of all groups plus the per-tag reversed response
    schedule, executed in one simulator run."""
    t_total = max(1, edt.t_measured)
    ts = TagSpace(g)

    moves: list[Move] = []
    grants: dict[int, set[int]] = {v: set(ts.tags_of(v)) for v in range(g.n)}
    if any(grp.kind == "merged" for grp in edt.groups):
        if edt.old_layout is None:
            raise ReplayError("merged decomposition lost its old layout")
        plan = _merged_edt_plan(g, edt)
        moves.extend(plan.moves)
        combined = plan
    else:
        starts = _layout_windows(edt.groups, edt.batches)
        combined = MovePlan()
        for gi, grp in enumerate(edt.groups):
            if grp.kind == "trivial":
                continue
            plan = group_forward_plan(g, grp, starts[gi])
            if plan.length > grp.rounds:
                raise ReplayError(f"group {gi} plan length {plan.length} "
                                  f"exceeds recorded {grp.rounds}")
            combined.moves.extend(plan.moves)
        moves.extend(combined.moves)

    # reverse direction: responses ride each tag's delivery path, flipped
    rev: list[Move] = []
    wanted = {}
    owner = edt.cluster_of_vertex()
    for k, cluster in enumerate(edt.clusters):
        leader = edt.leaders[k]
        for v in cluster:
            if v == leader:
                continue
            for tag in ts.tags_of(v):
                wanted[tag] = (v, leader)
    for tag, path in _paths_by_tag(combined, wanted).items():
        for rnd, a, b, _ in path:
            rev.append((2 * t_total - 1 - rnd, b, a, tag + RESPONSE_OFFSET))
    for k, cluster in enumerate(edt.clusters):
        leader = edt.leaders[k]
        for v in cluster:
            for t in ts.tags_of(v):
                grants.setdefault(leader, set()).add(t + RESPONSE_OFFSET)
    horizon = 2 * t_total + 1
    got = run_move_schedule(g, moves + rev, grants, horizon)
    fwd_got = {v: {t for t in s if t < RESPONSE_OFFSET} for v, s in got.items()}
    rev_got = {v: {t for t in s if t >= RESPONSE_OFFSET} for v, s in got.items()}
    return fwd_got, rev_got, horizon
