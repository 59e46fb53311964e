"""Heavy-stars merging on weighted cluster graphs.

The four steps: (1) every cluster orients its heaviest incident edge,
ties broken by maximizing the endpoint-id sum and then the larger
min-endpoint id; doubly-selected edges point toward the larger id, which
makes the oriented set an in-forest.  (2) Cole-Vishkin 3-coloring of the
rooted trees.  (3) color-guided marking that keeps the marked forest at
depth <= 4.  (4) per-tree parity choice extracting vertex-disjoint stars
holding at least half of each marked tree's weight.

With cluster-graph arboricity at most alpha, the stars capture at least a
1/(8*alpha) fraction of the total edge weight; `heavy_stars` raises
HeavyStarsViolation (carrying the witness numbers) when the measured
fraction falls short, which callers treat as a non-minor-free signal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .graph import Graph
from .measures import diameter_of_induced
from . import sim


class HeavyStarsViolation(RuntimeError):
    def __init__(self, captured: int, total: int, alpha: int):
        super().__init__(
            f"stars captured {captured}/{total} < 1/(8*{alpha}) of edge weight")
        self.captured = captured
        self.total = total
        self.alpha = alpha


@dataclass(frozen=True)
class WeightedClusterGraph:
    """Simple weighted graph over clusters.

    ids: distinct identifier per node (used for every tie-break).
    weights: {(i, j): w} with i < j node indices and w > 0.
    diameters: per-node induced diameter of the underlying cluster (0 for
        abstract instances).
    members: optional underlying vertex sets.
    """

    ids: tuple[int, ...]
    weights: Mapping[tuple[int, int], int]
    diameters: tuple[int, ...] = ()
    members: tuple[frozenset[int], ...] = ()

    def __post_init__(self):
        for (i, j), w in self.weights.items():
            if not (0 <= i < j < len(self.ids)):
                raise ValueError(f"bad weight key ({i},{j})")
            if w <= 0:
                raise ValueError("weights must be positive")

    @property
    def k(self) -> int:
        return len(self.ids)

    def neighbors_of(self, i: int) -> list[tuple[int, int]]:
        out = []
        for (a, b), w in self.weights.items():
            if a == i:
                out.append((b, w))
            elif b == i:
                out.append((a, w))
        return sorted(out)

    def total_weight(self) -> int:
        return sum(self.weights.values())

    def as_graph(self) -> Graph:
        return Graph(self.k, sorted(self.weights.keys()), ids=self.ids)


def cluster_graph_from_partition(g: Graph, clusters: Iterable[Iterable[int]],
                                 with_diameters: bool = True) -> WeightedClusterGraph:
    clusters = [frozenset(c) for c in clusters]
    owner = {}
    for k, c in enumerate(clusters):
        for v in c:
            owner[v] = k
    weights: dict[tuple[int, int], int] = {}
    for u, v in g.edges:
        if u == v:
            continue
        a, b = owner[u], owner[v]
        if a == b:
            continue
        key = (min(a, b), max(a, b))
        weights[key] = weights.get(key, 0) + 1
    ids = tuple(min(g.ids[v] for v in c) for c in clusters)
    diams = tuple(
        int(diameter_of_induced(g, c)) if with_diameters else 0 for c in clusters)
    return WeightedClusterGraph(ids=ids, weights=weights, diameters=diams,
                                members=tuple(clusters))


@dataclass(frozen=True)
class StarSet:
    """Vertex-disjoint stars: assignment maps node -> its star's center
    (centers map to themselves); nodes outside every star are absent."""

    assignment: Mapping[int, int]
    captured_weight: int = 0
    total_weight: int = 0

    def centers(self) -> set[int]:
        return {c for c in self.assignment.values()}

    def star_of(self, center: int) -> set[int]:
        return {v for v, c in self.assignment.items() if c == center}

    def to_json(self, ids: tuple[int, ...]) -> str:
        return json.dumps(
            {"assignment": {str(ids[v]): ids[c] for v, c in sorted(self.assignment.items())}},
            sort_keys=True)


# -- step 1: orientation ------------------------------------------------------

def _pick_key(wcg: WeightedClusterGraph, u: int, v: int, w: int):
    return (w, wcg.ids[u] + wcg.ids[v], min(wcg.ids[u], wcg.ids[v]))


def orient_step1(wcg: WeightedClusterGraph) -> dict[int, int]:
    """Parent pointer per non-root cluster; the oriented set is acyclic.

    Every cluster with a neighbor selects its heaviest incident edge (tie
    rule above) and the edge is oriented away from the selector; an edge
    selected by both ends goes toward the larger id, leaving that endpoint
    a root.
    """
    pick: dict[int, int] = {}
    for u in range(wcg.k):
        best = None
        for v, w in wcg.neighbors_of(u):
            key = _pick_key(wcg, u, v, w)
            if best is None or key > best[0]:
                best = (key, v)
        if best is not None:
            pick[u] = best[1]
    parent: dict[int, int] = {}
    for u, v in pick.items():
        if pick.get(v) == u:
            lo, hi = (u, v) if wcg.ids[u] < wcg.ids[v] else (v, u)
            parent[lo] = hi  # doubly selected: orient toward the larger id
        else:
            parent[u] = v
    _assert_acyclic(parent)
    return parent


def _assert_acyclic(parent: Mapping[int, int]) -> None:
    state: dict[int, int] = {}
    for start in parent:
        if state.get(start):
            continue
        path = []
        v = start
        while v in parent and state.get(v) is None:
            state[v] = 1
            path.append(v)
            v = parent[v]
        if state.get(v) == 1:
            raise AssertionError(f"orientation contains a cycle through {v}")
        for x in path:
            state[x] = 2


def roots_of(parent: Mapping[int, int]) -> set[int]:
    nodes = set(parent) | set(parent.values())
    return nodes - set(parent)


# -- step 2: Cole-Vishkin -----------------------------------------------------

def _cv_step_color(own: int, par: int) -> int:
    diff = own ^ par
    i = (diff & -diff).bit_length() - 1
    return 2 * i + ((own >> i) & 1)


def cole_vishkin_3color(parent: Mapping[int, int], ids: tuple[int, ...]) -> tuple[dict[int, int], int]:
    """Proper 3-coloring {1,2,3} of rooted trees given by parent pointers.

    Returns (colors, iteration count of the bitwise reduction).  Each
    reduction iteration reads only the parent's current color; the final
    6->3 stage is three shift-down + recolor passes.
    """
    nodes = sorted(set(parent) | set(parent.values()))
    for v in nodes:
        if v in parent and parent[v] == v:
            raise ValueError("self-parent is not a forest")
    color = {v: ids[v] for v in nodes}
    # six lockstep iterations reach {0..5} from any 63-bit identifiers and
    # keep the message-passing twin (which cannot detect convergence
    # globally) byte-identical to this reference
    iters = 6
    for _ in range(iters):
        new = {}
        for v in nodes:
            par = color[parent[v]] if v in parent else color[v] ^ 1
            new[v] = _cv_step_color(color[v], par)
        color = new
    if any(c >= 6 for c in color.values()):
        raise AssertionError("color reduction failed to converge")
    color = {v: c + 1 for v, c in color.items()}  # -> {1..6}
    for drop in (6, 5, 4):
        # shift down: every node adopts its parent's color, roots move away
        # from their own color; afterwards all children of v share v's old color
        old = dict(color)
        for v in nodes:
            if v in parent:
                color[v] = old[parent[v]]
            else:
                color[v] = 1 if old[v] != 1 else 2
        for v in nodes:
            if color[v] == drop:
                banned = {color[parent[v]]} if v in parent else set()
                banned.add(old[v])  # the common color of v's children
                color[v] = min(c for c in (1, 2, 3) if c not in banned)
    _assert_proper(parent, color)
    return color, iters


def _assert_proper(parent: Mapping[int, int], color: Mapping[int, int]) -> None:
    for v, p in parent.items():
        if color[v] == color[p]:
            raise AssertionError(f"improper coloring on edge {v}->{p}")


# -- step 3: marking ----------------------------------------------------------

def _edge_weight(wcg: WeightedClusterGraph, u: int, v: int) -> int:
    return wcg.weights[(min(u, v), max(u, v))]


def mark_step3(wcg: WeightedClusterGraph, parent: Mapping[int, int],
               color: Mapping[int, int]) -> set[tuple[int, int]]:
    """Marked tree edges (child, parent), following the two color rules.

    A node u of color 1 weighs its child edges from colors {2,3} against
    its parent edge (when the parent has color 2 or 3) and marks the
    heavier side (ties keep the child side); color 2 does the same with
    color set {3}.  The marked forest has depth at most 4.
    """
    children: dict[int, list[int]] = {}
    for c, p in parent.items():
        children.setdefault(p, []).append(c)
    marked: set[tuple[int, int]] = set()
    for u, cu in color.items():
        if cu == 1:
            cset = (2, 3)
        elif cu == 2:
            cset = (3,)
        else:
            continue
        ins = [c for c in children.get(u, ()) if color[c] in cset]
        out = parent.get(u) if u in parent and color[parent[u]] in cset else None
        w_in = sum(_edge_weight(wcg, c, u) for c in ins)
        w_out = _edge_weight(wcg, u, out) if out is not None else 0
        if w_in >= w_out:
            marked.update((c, u) for c in ins)
        else:
            marked.add((u, out))
    return marked


def marked_depths(marked: set[tuple[int, int]]) -> dict[int, int]:
    """Depth per node in the forest induced by the marked edges."""
    mparent = {c: p for c, p in marked}
    depth: dict[int, int] = {}

    def resolve(v: int) -> int:
        trail = []
        while v in mparent and v not in depth:
            trail.append(v)
            v = mparent[v]
        base = depth.get(v, 0)
        depth.setdefault(v, 0)
        for x in reversed(trail):
            base += 1
            depth[x] = base
        return depth[trail[0]] if trail else base

    for c, p in marked:
        resolve(c)
        resolve(p)
    return depth


def extract_stars(wcg: WeightedClusterGraph, marked: set[tuple[int, int]]) -> StarSet:
    """Per marked tree, keep the heavier of the odd->even / even->odd levels."""
    if not marked:
        return StarSet(assignment={}, captured_weight=0,
                       total_weight=wcg.total_weight())
    mparent = {c: p for c, p in marked}
    depth = marked_depths(marked)

    def tree_root(v: int) -> int:
        while v in mparent:
            v = mparent[v]
        return v

    trees: dict[int, list[tuple[int, int]]] = {}
    for c, p in marked:
        trees.setdefault(tree_root(p), []).append((c, p))

    assignment: dict[int, int] = {}
    captured = 0
    for root, edges in sorted(trees.items()):
        odd_to_even = [(c, p) for c, p in edges if depth[c] % 2 == 1]
        even_to_odd = [(c, p) for c, p in edges if depth[c] % 2 == 0]
        w_oe = sum(_edge_weight(wcg, c, p) for c, p in odd_to_even)
        w_eo = sum(_edge_weight(wcg, c, p) for c, p in even_to_odd)
        chosen = odd_to_even if w_oe >= w_eo else even_to_odd
        captured += max(w_oe, w_eo)
        for c, p in chosen:
            assignment[c] = p
            assignment[p] = p
    return StarSet(assignment=assignment, captured_weight=captured,
                   total_weight=wcg.total_weight())


@dataclass
class HeavyStarsReport:
    parent: dict[int, int]
    colors: dict[int, int]
    cv_iterations: int
    marked: set[tuple[int, int]]
    max_marked_depth: int
    stars: StarSet
    captured_fraction: Fraction


def heavy_stars(wcg: WeightedClusterGraph, alpha: int) -> HeavyStarsReport:
    """Run all four steps and enforce the 1/(8*alpha) capture guarantee."""
    total = wcg.total_weight()
    if total == 0:
        empty = StarSet(assignment={}, captured_weight=0, total_weight=0)
        return HeavyStarsReport({}, {}, 0, set(), 0, empty, Fraction(0))
    parent = orient_step1(wcg)
    colors, iters = cole_vishkin_3color(parent, wcg.ids)
    marked = mark_step3(wcg, parent, colors)
    depths = marked_depths(marked)
    max_depth = max(depths.values(), default=0)
    if max_depth > 4:
        raise AssertionError(f"marked forest depth {max_depth} exceeds 4")
    stars = extract_stars(wcg, marked)
    frac = Fraction(stars.captured_weight, total)
    if frac * 8 * alpha < 1:
        raise HeavyStarsViolation(stars.captured_weight, total, alpha)
    return HeavyStarsReport(parent=parent, colors=colors, cv_iterations=iters,
                            marked=marked, max_marked_depth=max_depth, stars=stars,
                            captured_fraction=frac)


# -- message-passing version ---------------------------------------------------

class HeavyStarsProgram:
    """NodeProgram running the four steps on a cluster graph.

    Each node starts knowing only its own identifier and the weights of its
    incident edges (given per node index); neighbor identifiers are learned
    in the first exchange.  All messages fit in two 64-bit fields.  The
    schedule is a fixed round table, so every node derives its phase from
    the round number alone.  Output: the star center's identifier, -1 when
    the node joined no star, -2 on a depth overflow (non-forest input).

    Round table: 0 id exchange; 1 pick; 2 adopt parent + first color
    broadcast; 3..8 bitwise color reduction; 9..14 three shift-down /
    recolor passes; 15 colors up; 16 mark; 17 mark union + root depth;
    18..21 depth broadcast; 22..25 weight convergecast; 26 parity decision;
    27..30 parity broadcast; 31 star output.
    """

    CV_ROUNDS = 6  # bitwise iterations reaching 6 colors from 63-bit ids

    R_PICK = 1
    R_RESOLVE = 2
    R_CV_LAST = 2 + CV_ROUNDS           # 8
    R_SHIFT = (9, 11, 13)               # drop 6, 5, 4
    R_COLORS_UP = 15
    R_MARK = 16
    R_MARK_UNION = 17
    R_DEPTH_LAST = 21
    R_WEIGHTS0 = 22                     # depth-4 nodes send here
    R_PARITY = 26
    R_FINISH = 31

    def __init__(self, weights_by_node: list[dict[int, int]]):
        self.weights_by_node = weights_by_node

    def initialize(self, ctx: sim.NodeContext):
        return {
            "ctx": ctx,
            "w": dict(self.weights_by_node[ctx.node]),
            "nbr": {},            # port -> neighbor identifier
            "pick_port": None,
            "parent_port": None,
            "child_ports": set(),
            "color": ctx.ident,
            "old_color": None,
            "parent_color": None,
            "marks": set(),       # marked incident ports
            "marked_up": False,
            "marked_child_ports": set(),
            "depth": None,
            "acc": [0, 0],        # odd->even / even->odd subtree weights
            "parity": None,
        }

    def step(self, st, rnd, inbox):
        ctx = st["ctx"]
        if ctx.degree == 0 or not st["w"]:
            return sim.StepResult(st, halted=True, output=-1)

        if rnd == 0:
            return sim.StepResult(
                st, outbox={p: (ctx.ident,) for p in range(ctx.degree)})

        if rnd == self.R_PICK:
            st["nbr"] = {p: msg[0] for p, msg in inbox.items()}
            best = None
            for port, w in sorted(st["w"].items()):
                nid = st["nbr"][port]
                key = (w, ctx.ident + nid, min(ctx.ident, nid))
                if best is None or key > best[0]:
                    best = (key, port)
            st["pick_port"] = best[1]
            return sim.StepResult(st, outbox={best[1]: (1,)})

        if rnd == self.R_RESOLVE:
            pickers = set(inbox)
            pp = st["pick_port"]
            doubly = pp in pickers
            if doubly and st["nbr"][pp] > ctx.ident:
                st["parent_port"] = pp
            elif doubly:
                st["parent_port"] = None  # larger id of a doubly-selected edge
            else:
                st["parent_port"] = pp
            st["child_ports"] = {p for p in pickers if p != pp}
            if doubly and st["parent_port"] is None:
                st["child_ports"].add(pp)
            return sim.StepResult(st, outbox=self._down(st, st["color"]))

        if self.R_RESOLVE < rnd <= self.R_CV_LAST:
            par = (inbox[st["parent_port"]][0]
                   if st["parent_port"] is not None else st["color"] ^ 1)
            st["color"] = _cv_step_color(st["color"], par)
            if rnd == self.R_CV_LAST:
                st["color"] += 1  # map {0..5} -> {1..6}
            return sim.StepResult(st, outbox=self._down(st, st["color"]))

        if rnd in self.R_SHIFT:
            st["old_color"] = st["color"]
            if st["parent_port"] is not None:
                st["color"] = inbox[st["parent_port"]][0]
            else:
                st["color"] = 1 if st["color"] != 1 else 2
            return sim.StepResult(st, outbox=self._down(st, st["color"]))

        if rnd - 1 in self.R_SHIFT:  # recolor rounds 10, 12, 14
            drop = {10: 6, 12: 5, 14: 4}[rnd]
            if st["parent_port"] is not None:
                st["parent_color"] = inbox[st["parent_port"]][0]
            if st["color"] == drop:
                banned = {st["old_color"]}
                if st["parent_port"] is not None:
                    banned.add(st["parent_color"])
                st["color"] = min(c for c in (1, 2, 3) if c not in banned)
            return sim.StepResult(st, outbox=self._down(st, st["color"]))

        if rnd == self.R_COLORS_UP:
            if st["parent_port"] is not None:
                st["parent_color"] = inbox[st["parent_port"]][0]
            out = {}
            if st["parent_port"] is not None:
                out[st["parent_port"]] = (st["color"],)
            return sim.StepResult(st, outbox=out)

        if rnd == self.R_MARK:
            child_colors = {p: inbox[p][0] for p in st["child_ports"] if p in inbox}
            cu = st["color"]
            cset = (2, 3) if cu == 1 else ((3,) if cu == 2 else ())
            marks = set()
            if cset:
                ins = [p for p, c in child_colors.items() if c in cset]
                has_out = (st["parent_port"] is not None
                           and st["parent_color"] in cset)
                w_in = sum(st["w"][p] for p in ins)
                w_out = st["w"][st["parent_port"]] if has_out else 0
                if w_in >= w_out:
                    marks.update(ins)
                elif has_out:
                    marks.add(st["parent_port"])
            st["marks"] = marks
            return sim.StepResult(st, outbox={p: (1,) for p in marks})

        if rnd == self.R_MARK_UNION:
            st["marks"] |= set(inbox)
            pp = st["parent_port"]
            st["marked_up"] = pp is not None and pp in st["marks"]
            st["marked_child_ports"] = {p for p in st["marks"] if p != pp}
            out = {}
            if not st["marked_up"]:
                st["depth"] = 0
                out = {p: (1,) for p in st["marked_child_ports"]}
            return sim.StepResult(st, outbox=out)

        if self.R_MARK_UNION < rnd <= self.R_DEPTH_LAST:
            out = {}
            if st["depth"] is None and st["parent_port"] in inbox:
                st["depth"] = inbox[st["parent_port"]][0]
                out = {p: (st["depth"] + 1,) for p in st["marked_child_ports"]}
            return sim.StepResult(st, outbox=out)

        if self.R_DEPTH_LAST < rnd <= self.R_PARITY:
            if st["depth"] is None and st["marked_up"]:
                return sim.StepResult(st, halted=rnd == self.R_PARITY, output=-2)
            for p in inbox:
                a, b = inbox[p]
                st["acc"][0] += a
                st["acc"][1] += b
            out = {}
            d = st["depth"] if st["depth"] is not None else 0
            if st["marked_up"] and rnd == self.R_WEIGHTS0 + (4 - d):
                a, b = st["acc"]
                if d % 2 == 1:
                    a += st["w"][st["parent_port"]]
                else:
                    b += st["w"][st["parent_port"]]
                out[st["parent_port"]] = (a, b)
            if rnd == self.R_PARITY and not st["marked_up"]:
                st["parity"] = 1 if st["acc"][0] >= st["acc"][1] else 0
                out = {p: (st["parity"],) for p in st["marked_child_ports"]}
            return sim.StepResult(st, outbox=out)

        if self.R_PARITY < rnd < self.R_FINISH:
            out = {}
            if st["parity"] is None and st["parent_port"] in inbox:
                st["parity"] = inbox[st["parent_port"]][0]
                out = {p: (st["parity"],) for p in st["marked_child_ports"]}
            return sim.StepResult(st, outbox=out)

        if rnd == self.R_FINISH:
            return sim.StepResult(st, halted=True, output=self._center(st))

        return sim.StepResult(st)

    def _center(self, st):
        ctx = st["ctx"]
        d = st["depth"]
        if d is None:
            return -2 if st["marked_up"] else -1
        parity = st["parity"] if st["parity"] is not None else 1
        if st["marked_up"] and d % 2 == parity:
            return st["nbr"][st["parent_port"]]
        if st["marked_child_ports"] and (d + 1) % 2 == parity:
            return ctx.ident
        return -1

    @staticmethod
    def _down(st, color):
        return {p: (color,) for p in st["child_ports"]}


def heavy_stars_via_program(wcg: WeightedClusterGraph,
                            config: sim.SimConfig | None = None) -> tuple[StarSet, sim.SimTranscript]:
    """Run the message-passing version and assemble its StarSet."""
    g = wcg.as_graph()
    inc = g.incidence()
    weights_by_node = []
    for v in range(g.n):
        table = {}
        for port, e in enumerate(inc[v]):
            u, w = g.edges[e]
            other = w if v == u else u
            key = (min(v, other), max(v, other))
            table[port] = wcg.weights[key]
        weights_by_node.append(table)
    cfg = config or sim.config_fitting(g.n, fields=2, max_rounds=200)
    tr = sim.run(g, HeavyStarsProgram(weights_by_node), cfg)
    id_to_index = {ident: i for i, ident in enumerate(wcg.ids)}
    assignment = {}
    captured = 0
    for ident, center in tr.outputs.items():
        if center is None or center < 0:
            continue
        assignment[id_to_index[ident]] = id_to_index[center]
    for v, c in assignment.items():
        if v != c:
            captured += _edge_weight(wcg, v, c)
    return StarSet(assignment=assignment, captured_weight=captured,
                   total_weight=wcg.total_weight()), tr
