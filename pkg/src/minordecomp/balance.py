"""Information gathering by token load balancing on the expander split.

One balancing step: every split vertex sends one token to each distinct
neighbor whose beginning-of-step load is at least 2*Delta+1 below its own;
the threshold guarantees a sender still holds more than each receiver
afterwards, so the per-vertex potential strictly decreases and every run
reaches a fixed point.  Token identities move lowest-tag-first, receivers
in ascending vertex order.

A gather phase seeds R0 copies of every still-undelivered message at its
slot vertex, balances to the imbalance target, then alternates token
doubling with rebalancing until the average load clears the harvest
threshold; every tag with a copy inside the target gadget counts as
delivered, and origins learn the outcome through a reverse replay.  Phases
repeat on the remainder until the requested fraction is delivered.

All constants are calibration knobs (c_hat), reported with every outcome;
round accounting: 2 rounds per forward step, 1 per reverse step, plus
2*diameter per global threshold check.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .graph import Graph
from .measures import conductance_estimate
from .split import expander_split, SplitMap


class GatherProgressError(RuntimeError):
    """A phase delivered nothing new: the routing graph balances too slowly
    (low conductance / no high-degree target)."""

    def __init__(self, msg, delivered=None, requested=0):
        super().__init__(msg)
        self.delivered = delivered or set()
        self.requested = requested


@dataclass
class PhasePlan:
    segments: list[int]          # balancing steps per segment (splits between)
    delivered: list[int]         # tags first delivered in this phase
    # captured cross-gadget token moves: (phase step, src vertex, dst vertex,
    # tag), vertices in cluster numbering; gadget-internal hops are free
    moves: list[tuple[int, int, int, int]] = field(default_factory=list)


@dataclass
class BalancePlan:
    """Replayable description of one gather execution."""

    r0: int
    target: int                  # imbalance target
    avg_threshold: int
    delta_split: int
    d_used: int = 0              # diameter charged per global check
    phases: list[PhasePlan] = field(default_factory=list)
    rounds: int = 0
    check_rounds: int = 0


@dataclass
class GatherOutcome:
    delivered: set[tuple[int, int]]      # (origin vertex, tag)
    rounds_used: int
    fraction: Fraction
    undelivered_by_vertex: dict[int, int]
    plan: BalancePlan | None = None
    params: dict = field(default_factory=dict)
    charged: bool = False


def load_balance_step(g: Graph, loads: Sequence[int], delta: int) -> np.ndarray:
    """One simultaneous balancing step on per-vertex token counts."""
    loads = np.asarray(loads, dtype=np.int64)
    if loads.shape != (g.n,):
        raise ValueError("loads must have one entry per vertex")
    src, dst = _directed_pairs(g)
    if src.size == 0:
        return loads.copy()
    fire = loads[dst] <= loads[src] - (2 * delta + 1)
    out = loads.copy()
    np.subtract.at(out, src[fire], 1)
    np.add.at(out, dst[fire], 1)
    return out


def _directed_pairs(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    pairs = set()
    for u, v in g.edges:
        if u == v:
            continue
        pairs.add((u, v))
        pairs.add((v, u))
    if not pairs:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    arr = np.array(sorted(pairs), dtype=np.int64)
    return arr[:, 0], arr[:, 1]


class _TokenStore:
    """Per-vertex multisets of tags with lowest-tag-first extraction."""

    def __init__(self, n: int):
        self.counts: list[dict[int, int]] = [dict() for _ in range(n)]
        self.heaps: list[list[int]] = [[] for _ in range(n)]
        self.loads = np.zeros(n, dtype=np.int64)

    def add(self, v: int, tag: int, count: int = 1) -> None:
        c = self.counts[v]
        if tag not in c or c[tag] == 0:
            heapq.heappush(self.heaps[v], tag)
            c[tag] = count
        else:
            c[tag] += count
        self.loads[v] += count

    def pop_lowest(self, v: int) -> int:
        c = self.counts[v]
        h = self.heaps[v]
        while h and c.get(h[0], 0) == 0:
            heapq.heappop(h)
        tag = h[0]
        c[tag] -= 1
        if c[tag] == 0:
            heapq.heappop(h)
        self.loads[v] -= 1
        return tag

    def double_all(self) -> None:
        for v, c in enumerate(self.counts):
            if not c:
                continue
            for tag in c:
                c[tag] *= 2
            self.loads[v] = 2 * self.loads[v]

    def tags_at(self, verts) -> set[int]:
        out = set()
        for v in verts:
            out.update(t for t, k in self.counts[v].items() if k > 0)
        return out

    def clear(self) -> None:
        for v in range(len(self.counts)):
            self.counts[v] = {}
            self.heaps[v] = []
        self.loads[:] = 0


def _balance_until(store: _TokenStore, src: np.ndarray, dst: np.ndarray,
                   delta: int, target: int, step_cap: int,
                   on_move=None) -> int:
    """Balance until max |load - avg| <= target, fixpoint, or cap; returns steps."""
    n = store.loads.shape[0]
    thresh = 2 * delta + 1
    steps = 0
    while steps < step_cap:
        loads = store.loads
        total = int(loads.sum())
        if np.abs(loads * n - total).max() <= target * n:
            break
        fire = loads[dst] <= loads[src] - thresh
        idx = np.nonzero(fire)[0]
        if idx.size == 0:
            break
        moves = []
        order = np.argsort(src[idx], kind="stable")
        idx = idx[order]
        senders = src[idx]
        receivers = dst[idx]
        pos = 0
        while pos < idx.size:
            v = senders[pos]
            end = pos
            while end < idx.size and senders[end] == v:
                end += 1
            for j in range(pos, end):  # receivers ascend: pairs pre-sorted
                tag = store.pop_lowest(int(v))
                moves.append((int(v), int(receivers[j]), tag))
            pos = end
        for v, u, tag in moves:
            store.add(u, tag)
        if on_move is not None:
            on_move(steps, moves)
        steps += 1
    return steps


def gather_by_balancing(g_cluster: Graph, v_star: int,
                        messages: Sequence[Sequence[int]], f: Fraction,
                        *, phi_hat: Fraction | float | None = None,
                        c_hat: int = 1, diameter: int | None = None,
                        charged: bool = False, capture_moves: bool = False,
                        phase_cap: int | None = None) -> GatherOutcome:
    """Deliver at least a 1-f fraction of the per-vertex messages to v_star.

    `messages[v]` holds at most deg(v) distinct integer tags.  Raises
    GatherProgressError when a phase makes no progress before the fraction
    target is met.  In charged mode no tokens move: full delivery is
    assumed and the round cost comes from the printed formula (structural
    callers use this above message scale).
    """
    f = Fraction(f)
    if not (0 < f < Fraction(1, 2)):
        raise ValueError("f must lie in (0, 1/2)")
    n = g_cluster.n
    if not (0 <= v_star < n):
        raise ValueError("v_star out of range")
    if g_cluster.degree(v_star) != g_cluster.max_degree:
        raise ValueError("v_star must have maximum degree")
    if len(messages) != n:
        raise ValueError("need a message list per vertex")
    for v in range(n):
        if len(messages[v]) > g_cluster.degree(v):
            raise ValueError(f"vertex {v} offers more messages than its degree")
        if len(set(messages[v])) != len(messages[v]):
            raise ValueError("tags must be distinct")

    total_msgs = sum(len(ms) for ms in messages)
    if total_msgs == 0:
        return GatherOutcome(set(), 0, Fraction(1), {}, params={"empty": True})

    m_routing = sum(1 for u, v in g_cluster.edges if u != v)
    if phi_hat is None:
        phi_hat = conductance_estimate(g_cluster)
    phi_hat = Fraction(phi_hat)
    if phi_hat <= 0:
        raise GatherProgressError("routing graph is disconnected", requested=total_msgs)
    inv_phi = math.ceil(1 / phi_hat)
    log_e = max(1, math.ceil(math.log2(max(2, 2 * m_routing))))
    target = max(1, c_hat * inv_phi * log_e)
    r0 = 4 * target
    avg_threshold = 2 * target
    log_f = max(1, math.ceil(math.log2(1 / f)))
    ratio = max(1, math.ceil(2 * m_routing / max(1, g_cluster.max_degree)))
    if phase_cap is None:
        phase_cap = max(16, 16 * ratio * log_f)
    if diameter is None:
        diameter = _bfs_diameter_estimate(g_cluster)

    params = {"r0": r0, "target": target, "avg_threshold": avg_threshold,
              "phi_hat": str(phi_hat), "c_hat": c_hat, "log_e": log_e,
              "phase_cap": phase_cap, "f": str(f)}

    if charged:
        rounds = 2 * ratio * (inv_phi ** 2) * log_e * (log_f ** 2)
        delivered = {(v, t) for v in range(n) for t in messages[v]}
        params["formula"] = ("rounds = 2 * ceil(2m/Delta) * ceil(1/phi)^2 * "
                             "ceil(log2 2m) * ceil(log2 1/f)^2")
        return GatherOutcome(delivered, rounds, Fraction(1), {}, params=params,
                             charged=True)

    split, smap = expander_split(g_cluster)
    delta_split = split.max_degree
    src, dst = _directed_pairs(split)
    store = _TokenStore(split.n)
    star_slots = list(smap.gadget(v_star))

    origin_of = {}
    slot_of = {}
    for v in range(n):
        for i, tag in enumerate(messages[v]):
            origin_of[tag] = v
            slot_of[tag] = smap.slot(v, i)

    plan = BalancePlan(r0=r0, target=target, avg_threshold=avg_threshold,
                       delta_split=delta_split, d_used=diameter)
    delivered_tags: set[int] = set(messages[v_star])  # already at the target
    remaining = sorted(set(origin_of) - delivered_tags)
    need = math.ceil((1 - f) * total_msgs)

    steps_cap_floor = 256
    while len(delivered_tags) < total_msgs and len(delivered_tags) < need:
        if len(plan.phases) >= phase_cap:
            raise GatherProgressError(
                f"phase cap {phase_cap} hit at {len(delivered_tags)}/{total_msgs}",
                delivered=_tag_pairs(delivered_tags, origin_of),
                requested=total_msgs)
        store.clear()
        for tag in remaining:
            store.add(slot_of[tag], tag, r0)
        segments = []
        moves: list[tuple[int, int, int, int]] = []
        on_move = None
        if capture_moves:
            base_of = [smap.backward[x][0] for x in range(split.n)]

            def on_move(step, step_moves, _base=base_of, _out=moves, _seg=segments):
                off = sum(_seg)
                for a, b, tag in step_moves:
                    if _base[a] != _base[b]:
                        _out.append((off + step, _base[a], _base[b], tag))

        m_imb = int(np.abs(store.loads * split.n - store.loads.sum()).max())
        cap = max(steps_cap_floor, 16 * (m_imb + 1) * inv_phi)
        segments.append(_balance_until(store, src, dst, delta_split, target, cap,
                                       on_move=on_move))
        splits = 0
        while int(store.loads.sum()) < avg_threshold * split.n and splits < 40:
            store.double_all()
            splits += 1
            segments.append(_balance_until(store, src, dst, delta_split, target, cap,
                                           on_move=on_move))
        new_tags = store.tags_at(star_slots) - delivered_tags
        phase = PhasePlan(segments=segments, delivered=sorted(new_tags), moves=moves)
        plan.phases.append(phase)
        fwd = sum(segments)
        plan.rounds += 2 * fwd + fwd  # forward (loads+tokens) plus reverse replay
        plan.check_rounds += (len(segments) + 1) * 2 * diameter
        if not new_tags:
            raise GatherProgressError(
                f"no progress in phase {len(plan.phases)} "
                f"({len(delivered_tags)}/{total_msgs} delivered)",
                delivered=_tag_pairs(delivered_tags, origin_of),
                requested=total_msgs)
        delivered_tags |= new_tags
        remaining = sorted(set(origin_of) - delivered_tags)

    delivered = _tag_pairs(delivered_tags, origin_of)
    undeliv: dict[int, int] = {}
    for tag, v in origin_of.items():
        if tag not in delivered_tags:
            undeliv[v] = undeliv.get(v, 0) + 1
    rounds = plan.rounds + plan.check_rounds
    return GatherOutcome(delivered, rounds, Fraction(len(delivered_tags), total_msgs),
                         undeliv, plan=plan, params=params)


def _tag_pairs(tags, origin_of) -> set[tuple[int, int]]:
    return {(origin_of[t], t) for t in tags}


def _bfs_diameter_estimate(g: Graph) -> int:
    """Double-sweep estimate, sufficient for check-cost accounting."""
    if g.n <= 1:
        return 0
    far = max(g.bfs_layers(0).items(), key=lambda kv: (kv[1], kv[0]))
    layers = g.bfs_layers(far[0])
    return max(layers.values())
