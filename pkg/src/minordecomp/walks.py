"""Derandomized lazy-walk routing on the regularized expander split.

Every message seeds r lazy walks on the d-regular split (self-loops pad
degrees).  One hash symbol in {1..2d} drives each (walk, step): values up
to d stay put, the rest move along the corresponding incidence port.  If
more than 3r walks meet at a vertex at any time, all of them are dropped
there (that is the physical budget of 3r rounds per step); a message is
delivered when one of its walks survives to finish inside the target
gadget.  Schedule synthesis enumerates hash seeds and keeps the first one
whose full simulation reaches the requested fraction -- the verification
is the simulation itself, so re-routing with the schedule reproduces the
outcome exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .graph import Graph
from .hashing import KWiseHash
from .measures import CapacityError
from .split import expander_split, regularize_even
from .balance import GatherOutcome

MIXING_CAP = 512


def lazy_walk_matrix(g: Graph) -> np.ndarray:
    """Column-stochastic one-step matrix: half stay, half uniform neighbor
    (a self-loop counts once in the degree and once as a move target)."""
    n = g.n
    a = np.zeros((n, n))
    for u, v in g.edges:
        if u == v:
            a[u, u] += 1.0
        else:
            a[u, v] += 1.0
            a[v, u] += 1.0
    deg = g.degrees.astype(float)
    if (deg == 0).any():
        raise ValueError("walk matrix needs minimum degree 1")
    return 0.5 * np.eye(n) + 0.5 * (a / deg[None, :])


def mixing_time_measured(g: Graph, cap: int = MIXING_CAP,
                         step_cap: int = 500_000) -> int:
    """Smallest t with |p_v^t(u) - pi(u)| <= pi(u)/n for all u, v.

    Power iteration from every start at once; float64, adequate because
    only the integer step count is consumed downstream.
    """
    if g.n > cap:
        raise CapacityError(f"mixing time measured only up to {cap} vertices")
    if g.n == 1:
        return 0
    comps = g.connected_components()
    if len(comps) > 1:
        raise ValueError("mixing time undefined on a disconnected graph")
    w = lazy_walk_matrix(g)
    pi = g.degrees.astype(float) / float(g.degrees.sum())
    tol = pi / g.n
    dist = np.eye(g.n)
    t = 0
    while t < step_cap:
        if (np.abs(dist - pi[:, None]) <= tol[:, None]).all():
            return t
        dist = w @ dist
        t += 1
    raise CapacityError(f"mixing did not reach the bound within {step_cap} steps")


def mixing_time_bound(phi_hat: Fraction | float, edge_count: int, c_mix: int = 4) -> int:
    """Conductance-based fallback when measuring is out of cap."""
    inv = math.ceil(1 / Fraction(phi_hat))
    return max(1, c_mix * inv * inv * max(1, math.ceil(math.log2(max(2, 2 * edge_count)))))


@dataclass(frozen=True)
class WalkSchedule:
    """Routing schedule: hash table plus the walk-shape parameters."""

    hash: KWiseHash
    r: int
    tau: int
    d: int
    f: str
    c_used: int

    def bit_length(self) -> int:
        return self.hash.bit_length()

    def to_dict(self) -> dict:
        out = self.hash.to_dict()
        out.update({"r": self.r, "tau": self.tau, "d": self.d, "f": self.f,
                    "C": self.c_used})
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "WalkSchedule":
        h = KWiseHash.from_dict({"prime": d["prime"], "coeffs": d["coeffs"],
                                 "r": d["r"], "tau": d["tau"], "d": d["d"],
                                 "seed": d.get("seed", 0)})
        return cls(hash=h, r=d["r"], tau=d["tau"], d=d["d"], f=d["f"],
                   c_used=d.get("C", 4))


@dataclass
class WalkInstance:
    """A cluster prepared for walk routing: regularized split plus slots.

    Walk randomness is keyed by (slot key, walk index), not by the message
    tag, so a schedule synthesized once drives the same trajectories for
    every batch of messages fed through the same slots.  slot_keys must be
    globally distinct across instances sharing a schedule.
    """

    cluster: Graph
    v_star: int
    slot_tags: dict[int, int]          # split slot -> message tag
    tag_origin: dict[int, int]         # tag -> cluster vertex
    slot_keys: dict[int, int]          # split slot -> global walk key
    slot_owner: tuple[int, ...]        # split slot -> cluster vertex
    split_n: int
    star_slots: tuple[int, ...]
    port_target: np.ndarray            # (split_n, d) move targets
    d: int

    @classmethod
    def build(cls, cluster: Graph, v_star: int,
              messages: Sequence[Sequence[int]], d: int | None = None,
              slot_key_base: Sequence[int] | None = None) -> "WalkInstance":
        """slot_key_base[v] is the global key of v's rank-0 slot; default
        uses the cluster-local slot index (fine for a single instance)."""
        if cluster.degree(v_star) != cluster.max_degree:
            raise ValueError("v_star must have maximum degree")
        split, smap = expander_split(cluster)
        want_d = d if d is not None else _even_at_least(split.max_degree)
        tilde = regularize_even(split, want_d)
        inc = tilde.incidence()
        port_target = np.zeros((tilde.n, want_d), dtype=np.int64)
        for v in range(tilde.n):
            for j, e in enumerate(inc[v]):
                port_target[v, j] = tilde.edge_other_end(e, v)
        slot_tags = {}
        tag_origin = {}
        slot_keys = {}
        for v in range(cluster.n):
            if len(messages[v]) > cluster.degree(v):
                raise ValueError(f"vertex {v} offers more messages than slots")
            for i, tag in enumerate(messages[v]):
                slot = smap.slot(v, i)
                slot_tags[slot] = tag
                tag_origin[tag] = v
                slot_keys[slot] = (slot if slot_key_base is None
                                   else slot_key_base[v] + i)
        return cls(cluster=cluster, v_star=v_star, slot_tags=slot_tags,
                   tag_origin=tag_origin, slot_keys=slot_keys,
                   slot_owner=tuple(smap.backward[x][0] for x in range(tilde.n)),
                   split_n=tilde.n,
                   star_slots=tuple(smap.gadget(v_star)),
                   port_target=port_target, d=want_d)

    @property
    def message_count(self) -> int:
        return len(self.slot_tags)


def _even_at_least(x: int) -> int:
    return x + (x % 2) if x >= 2 else 2


@dataclass
class WalkRun:
    """Full deterministic simulation of one schedule over instances."""

    delivered_tags: set[int]
    fraction: Fraction
    positions_history: list[np.ndarray]   # per time 0..tau, positions (-1 dead)
    walk_tags: np.ndarray
    walk_beta: np.ndarray
    max_load: int
    discard_events: int


def simulate_walks(instances: Sequence[WalkInstance], schedule: WalkSchedule,
                   keep_history: bool = False) -> WalkRun:
    """Run all walks of all instances under one schedule.

    Instances occupy disjoint index spaces (positions are offset), matching
    disjoint subgraphs sharing a schedule.  Before any discard event the
    per-time total load equals r * message count.
    """
    r, tau = schedule.r, schedule.tau
    offs = []
    total_split = 0
    for inst in instances:
        if inst.d != schedule.d:
            raise ValueError("instance regularized to a different degree")
        offs.append(total_split)
        total_split += inst.split_n
    port = np.zeros((total_split, schedule.d), dtype=np.int64)
    star = np.zeros(total_split, dtype=bool)
    seed_pos = []
    seed_tag = []
    seed_key = []
    for inst, off in zip(instances, offs):
        port[off:off + inst.split_n] = inst.port_target + off
        for s in inst.star_slots:
            star[off + s] = True
        for slot, tag in sorted(inst.slot_tags.items()):
            seed_pos.append(off + slot)
            seed_tag.append(tag)
            seed_key.append(inst.slot_keys[slot] if inst.slot_keys
                            else off + slot)
    msgs = len(seed_tag)
    if msgs == 0:
        return WalkRun(set(), Fraction(1), [], np.empty(0, dtype=np.int64),
                       np.empty(0, dtype=np.int64), 0, 0)

    pos = np.repeat(np.array(seed_pos, dtype=np.int64), r)
    tags = np.repeat(np.array(seed_tag, dtype=np.int64), r)
    keys = np.repeat(np.array(seed_key, dtype=np.int64), r)
    beta = np.tile(np.arange(r, dtype=np.int64), msgs)
    alive = np.ones(pos.shape, dtype=bool)
    points = schedule.hash.encode_points(keys, beta)
    cap = 3 * r
    history = []
    max_load = 0
    discards = 0

    def drop_overloaded():
        nonlocal discards, max_load
        live = pos[alive]
        if live.size == 0:
            return
        counts = np.bincount(live, minlength=total_split)
        max_load = max(max_load, int(counts.max()))
        over = counts > cap
        if over.any():
            kill = alive & over[pos]
            discards += int(kill.sum())
            alive[kill] = False

    drop_overloaded()
    if keep_history:
        history.append(np.where(alive, pos, -1).copy())
    for t in range(tau):
        sym = schedule.hash.draw(t, points)
        move = (sym > schedule.d) & alive
        tgt = port[pos, np.maximum(sym - schedule.d - 1, 0)]
        pos = np.where(move, tgt, pos)
        drop_overloaded()
        if keep_history:
            history.append(np.where(alive, pos, -1).copy())

    finish = alive & star[pos]
    delivered = set(int(t) for t in np.unique(tags[finish]))
    return WalkRun(delivered_tags=delivered,
                   fraction=Fraction(len(delivered), msgs),
                   positions_history=history, walk_tags=tags, walk_beta=beta,
                   max_load=max_load, discard_events=discards)


class ScheduleSearchError(RuntimeError):
    def __init__(self, msg, best_fraction=None):
        super().__init__(msg)
        self.best_fraction = best_fraction


def _walk_count(instances: Sequence[WalkInstance], f: Fraction, c: int, tau: int) -> int:
    ratio = 1
    for inst in instances:
        ratio = max(ratio, math.ceil(2 * sum(1 for u, v in inst.cluster.edges if u != v)
                                     / max(1, inst.cluster.max_degree)))
    log_f = max(1, math.ceil(math.log2(1 / f)))
    log_tau = max(0, math.ceil(math.log2(max(1, tau))))
    return max(1, c * (ratio * log_f + log_tau))


def synthesize_shared_schedule(clusters: Sequence[tuple[Graph, int, Sequence[Sequence[int]]]],
                               f: Fraction, c: int = 4, seed_cap: int = 4096,
                               tau: int | None = None,
                               phi_hat: Fraction | float | None = None,
                               slot_key_bases: Sequence[Sequence[int]] | None = None) -> tuple[WalkSchedule, WalkRun]:
    """One schedule serving several disjoint clusters.

    `clusters` holds (graph, v_star, per-vertex tag lists).  r and tau take
    the maxima over the clusters; the goodness fraction is global.  Seeds
    are tried in order 0, 1, 2, ...; on exhaustion the multiplier doubles
    (up to 32) before giving up.  slot_key_bases, when given, pins the
    global walk keys (one base per cluster vertex) so later batches reuse
    the same trajectories.
    """
    f = Fraction(f)
    if not (0 < f < Fraction(1, 2)):
        raise ValueError("f must lie in (0, 1/2)")
    d = 2
    for g, v_star, _ in clusters:
        split, _ = expander_split(g)
        d = max(d, _even_at_least(split.max_degree))
    if slot_key_bases is None:
        bases = []
        run_base = 0
        for g, _, _ in clusters:
            degs = g.degrees
            b = [0] * g.n
            for v in range(g.n):
                b[v] = run_base
                run_base += max(1, int(degs[v]))
            bases.append(b)
        slot_key_bases = bases
    instances = [WalkInstance.build(g, v_star, msgs, d=d, slot_key_base=base)
                 for (g, v_star, msgs), base in zip(clusters, slot_key_bases)]
    if all(inst.message_count == 0 for inst in instances):
        raise ValueError("no messages to route")
    if tau is None:
        tau = 1
        for inst in instances:
            split, _ = expander_split(inst.cluster)
            tilde = regularize_even(split, d)
            try:
                tau = max(tau, mixing_time_measured(tilde))
            except CapacityError:
                if phi_hat is None:
                    raise
                tau = max(tau, mixing_time_bound(phi_hat, tilde.m))

    best = None
    c_try = c
    while c_try <= 32:
        r = _walk_count(instances, f, c_try, tau)
        for seed in range(seed_cap):
            h = KWiseHash.from_seed(seed, r=r, tau=tau, two_d=2 * d)
            sched = WalkSchedule(hash=h, r=r, tau=tau, d=d, f=str(f), c_used=c_try)
            run = simulate_walks(instances, sched)
            if best is None or run.fraction > best:
                best = run.fraction
            if run.fraction >= 1 - f:
                return sched, run
        c_try *= 2
    raise ScheduleSearchError(
        f"no seed reached fraction {1 - f} (best {best})", best_fraction=best)


def synthesize_schedule(cluster: Graph, v_star: int,
                        messages: Sequence[Sequence[int]], f: Fraction,
                        c: int = 4, seed_cap: int = 4096,
                        tau: int | None = None,
                        phi_hat: Fraction | float | None = None,
                        slot_key_base: Sequence[int] | None = None) -> tuple[WalkSchedule, WalkRun]:
    """Single-cluster schedule synthesis (the one-subgraph special case)."""
    bases = [slot_key_base] if slot_key_base is not None else None
    return synthesize_shared_schedule([(cluster, v_star, messages)], f,
                                      c=c, seed_cap=seed_cap, tau=tau,
                                      phi_hat=phi_hat, slot_key_bases=bases)


def route_with_schedule(cluster: Graph, schedule: WalkSchedule, v_star: int,
                        messages: Sequence[Sequence[int]],
                        slot_key_base: Sequence[int] | None = None) -> GatherOutcome:
    """Execute a schedule; the outcome equals the synthesis-time simulation.

    Rounds: 3r per step forward plus the same for the reverse replay that
    reports the delivered set back to the origins.
    """
    if slot_key_base is None:
        degs = cluster.degrees
        slot_key_base = []
        run_base = 0
        for v in range(cluster.n):
            slot_key_base.append(run_base)
            run_base += max(1, int(degs[v]))
    inst = WalkInstance.build(cluster, v_star, messages, d=schedule.d,
                              slot_key_base=slot_key_base)
    run = simulate_walks([inst], schedule)
    total = inst.message_count
    if total == 0:
        return GatherOutcome(set(), 0, Fraction(1), {})
    delivered = {(inst.tag_origin[t], t) for t in run.delivered_tags}
    undeliv: dict[int, int] = {}
    for tag, v in inst.tag_origin.items():
        if tag not in run.delivered_tags:
            undeliv[v] = undeliv.get(v, 0) + 1
    rounds = 2 * 3 * schedule.r * schedule.tau
    return GatherOutcome(delivered, rounds, run.fraction, undeliv,
                         params={"r": schedule.r, "tau": schedule.tau,
                                 "d": schedule.d, "max_load": run.max_load})
