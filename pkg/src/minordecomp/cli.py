"""Command-line driver: generation, decomposition, routing, approximation,
property testing, benchmarking, verification.

Every run is a pure function of its arguments; reports embed a hash of the
effective configuration and the constants in force.  Exit codes: 0 on
success, 1 on usage errors, 2 on invariant violations (a witness file is
written next to the requested output).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from fractions import Fraction

import numpy as np

from . import generators
from .graph import (Graph, read_edge_list, write_edge_list, parse_fraction,
                    partition_to_json)
from .measures import conductance_exact, CapacityError
from .balance import gather_by_balancing, GatherProgressError
from .walks import synthesize_schedule, route_with_schedule, ScheduleSearchError
from .edt import edt_pipeline
from .verify import verify_edt
from .approx import (approx_max_cut, approx_mis, approx_matching, approx_vc,
                     ldd_distributed, expander_decomp_distributed)
from .proptest import test_property
from .overlap import DecompositionError
from .stars import HeavyStarsViolation

USAGE_ERROR = 1
INVARIANT_ERROR = 2


def _config_hash(args: dict) -> str:
    canon = json.dumps(args, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _report(payload: dict, args: dict, path: str | None) -> None:
    payload = dict(payload)
    # output destinations do not influence results, so keep them out of the
    # reproducibility hash and the embedded config
    args = {k: v for k, v in args.items()
            if k not in ("output", "trace_csv", "schedule_out", "func")}
    payload["config"] = args
    payload["config_hash"] = _config_hash(args)
    text = json.dumps(payload, sort_keys=True, default=str, indent=1)
    if path:
        with open(path, "w") as f:
            f.write(text + "\n")
    else:
        print(text)


def _load_graph(spec: str, seed: int) -> Graph:
    """Either a path to an edge-list file or generator syntax like
    grid:10x10, path:50, cycle:8, tree:40, planar:100, k5:60:4,
    regular:24:6."""
    if ":" not in spec:
        return read_edge_list(spec)
    kind, _, rest = spec.partition(":")
    if kind == "grid":
        w, _, h = rest.partition("x")
        return generators.grid(int(w), int(h))
    if kind == "path":
        return generators.path(int(rest))
    if kind == "cycle":
        return generators.cycle(int(rest))
    if kind == "star":
        return generators.star(int(rest))
    if kind == "tree":
        return generators.random_tree(int(rest), seed)
    if kind == "planar":
        return generators.random_planar(int(rest), seed)
    if kind == "k5":
        n, _, count = rest.partition(":")
        return generators.k5_planted(int(n), seed, int(count or 1))
    if kind == "regular":
        n, _, d = rest.partition(":")
        return generators.random_regular(int(n), int(d), seed)
    raise ValueError(f"unknown graph spec {spec!r}")


def cmd_gen(args) -> int:
    g = _load_graph(args.graph, args.seed)
    write_edge_list(g, args.output)
    print(f"wrote {g.n} vertices, {g.m} edges to {args.output}")
    return 0


def cmd_decompose(args) -> int:
    g = _load_graph(args.graph, args.seed)
    eps = parse_fraction(args.eps)
    conf = vars(args) | {"command": "decompose"}
    conf.pop("func", None)
    if args.flavor == "edt":
        edt = edt_pipeline(g, eps, variant=args.variant, alpha=args.alpha,
                           charged=args.mode != "message")
        payload = {"decomposition": json.loads(edt.to_json()),
                   "trace": edt.trace}
        _report(payload, conf, args.output)
        if args.trace_csv:
            with open(args.trace_csv, "w") as f:
                f.write(edt.trace_csv())
        return 0
    if args.flavor == "ldd":
        pieces, info = ldd_distributed(g, eps, variant=args.variant,
                                       alpha=args.alpha,
                                       charged=args.mode != "message")
        payload = {"clusters": [sorted(c) for c in pieces],
                   "eps_measured": str(info["eps_measured"]),
                   "d_measured": info["d_measured"]}
        _report(payload, conf, args.output)
        return 0
    pieces, info = expander_decomp_distributed(
        g, eps, flavor="overlap" if args.overlap else "plain",
        alpha=args.alpha, charged=args.mode != "message")
    payload = {"clusters": [sorted(c) for c in pieces],
               "fraction": str(info["fraction"]),
               "overlap": info["overlap"],
               "certificates": {str(k): str(v)
                                for k, v in info["certificates"].items()}}
    _report(payload, conf, args.output)
    return 0


def cmd_route(args) -> int:
    g = _load_graph(args.graph, args.seed)
    v_star = args.v_star if args.v_star is not None else int(np.argmax(g.degrees))
    messages, tag = [], 0
    for v in range(g.n):
        row = list(range(tag, tag + g.degree(v)))
        tag += g.degree(v)
        messages.append(row)
    f = parse_fraction(args.f) if args.f else Fraction(1, 2 * g.m + 1)
    conf = vars(args) | {"command": "route"}
    conf.pop("func", None)
    if args.engine == "balance":
        out = gather_by_balancing(g, v_star, messages, f,
                                  charged=args.mode != "message")
        payload = {"delivered": len(out.delivered), "requested": tag,
                   "fraction": str(out.fraction), "rounds": out.rounds_used,
                   "params": out.params}
        _report(payload, conf, args.output)
        return 0
    sched, run = synthesize_schedule(g, v_star, messages, f, c=args.walk_c)
    out = route_with_schedule(g, sched, v_star, messages)
    payload = {"delivered": len(out.delivered), "requested": tag,
               "fraction": str(out.fraction), "rounds": out.rounds_used,
               "seed": sched.hash.seed, "r": sched.r, "tau": sched.tau,
               "schedule_bits": sched.bit_length()}
    if args.schedule_out:
        with open(args.schedule_out, "w") as fh:
            json.dump(sched.to_dict(), fh)
    _report(payload, conf, args.output)
    return 0


def cmd_approx(args) -> int:
    g = _load_graph(args.graph, args.seed)
    eps = parse_fraction(args.eps)
    fn = {"maxcut": approx_max_cut, "mis": approx_mis,
          "matching": approx_matching, "vc": approx_vc}[args.problem]
    rep = fn(g, eps, alpha=args.alpha, charged=args.mode != "message")
    conf = vars(args) | {"command": "approx"}
    conf.pop("func", None)
    payload = {"problem": rep.problem, "value": rep.value,
               "feasible": rep.feasible, "opt": rep.opt,
               "opt_kind": rep.opt_kind, "ratio": rep.ratio,
               "rounds_charged": rep.rounds_charged}
    _report(payload, conf, args.output)
    if not rep.feasible:
        return INVARIANT_ERROR
    return 0


def cmd_test(args) -> int:
    g = _load_graph(args.graph, args.seed)
    eps = parse_fraction(args.eps)
    verdict = test_property(g, eps, args.property,
                            charged=args.mode != "message")
    conf = vars(args) | {"command": "test"}
    conf.pop("func", None)
    payload = json.loads(verdict.to_json())
    payload["fraction"] = str(verdict.fraction)
    _report(payload, conf, args.output)
    return 0


def cmd_verify(args) -> int:
    g = _load_graph(args.graph, args.seed)
    eps = parse_fraction(args.eps)
    with open(args.edt) as f:
        data = json.load(f)
    decomposition = data.get("decomposition", data)
    clusters = [frozenset(c["members"]) for c in decomposition["clusters"]]
    conf = vars(args) | {"command": "verify"}
    conf.pop("func", None)
    from .overlap import inter_cluster_fraction
    from .measures import diameter_of_induced
    import math as _math
    checks = {}
    witnesses = {}
    seen: set[int] = set()
    ok = True
    for c in clusters:
        if seen & c:
            ok = False
            witnesses["partition"] = f"overlap at {sorted(seen & c)[:5]}"
            break
        seen |= c
    if ok and seen != set(range(g.n)):
        ok = False
        witnesses["partition"] = "vertex set not covered"
    checks["partition"] = ok
    frac = inter_cluster_fraction(g, clusters) if ok else None
    checks["fraction"] = bool(ok and frac <= eps)
    if ok and frac > eps:
        witnesses["fraction"] = f"measured {frac} > {eps}"
    d_cap = args.d_cap if args.d_cap is not None else int(64 / eps)
    diam_ok = ok
    worst = 0
    if ok:
        for c in clusters:
            d = diameter_of_induced(g, c)
            if d == _math.inf:
                diam_ok = False
                witnesses["diameter"] = f"cluster {sorted(c)[:4]} disconnected"
                break
            worst = max(worst, int(d))
        diam_ok = diam_ok and worst <= d_cap
    checks["diameter"] = diam_ok
    payload = {"checks": checks, "witnesses": witnesses,
               "measured_fraction": str(frac), "measured_diameter": worst}
    _report(payload, conf, args.output)
    if not all(checks.values()):
        if args.output:
            with open(args.output + ".witness", "w") as f:
                json.dump(witnesses, f, indent=1, sort_keys=True)
        return INVARIANT_ERROR
    return 0


def cmd_bench(args) -> int:
    rows = ["instance,n,m,eps,eps_measured,D,T,charged_rounds,wall_seconds"]
    import time
    specs = []
    if args.config:
        with open(args.config) as f:
            specs = json.load(f)["runs"]
    for spec in specs:
        g = _load_graph(spec["graph"], spec.get("seed", args.seed))
        eps = parse_fraction(str(spec["eps"]))
        t0 = time.time()
        edt = edt_pipeline(g, eps, variant=spec.get("variant", "A"),
                           alpha=spec.get("alpha", 3),
                           charged=spec.get("mode", "charged") != "message")
        wall = time.time() - t0
        rows.append(f'{spec["graph"]},{g.n},{g.m},{eps},'
                    f"{float(edt.eps_measured):.5f},{edt.d_measured},"
                    f"{edt.t_measured},{edt.charged_rounds},{wall:.2f}")
    text = "\n".join(rows) + "\n"
    if args.output:
        with open(args.output, "w") as f:
            f.write(text)
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="minordecomp",
        description="cluster decompositions, routing, and their consumers")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--mode", choices=["message", "charged"], default="charged")
        p.add_argument("--alpha", type=int, default=3)
        p.add_argument("--bmult", type=int, default=16)
        p.add_argument("--max-rounds", type=int, default=1_000_000)
        p.add_argument("-o", "--output", default=None)

    p = sub.add_parser("gen", help="write a generated graph as an edge list")
    p.add_argument("graph", help="generator spec, e.g. grid:10x10")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("decompose", help="ldd | expander | edt")
    p.add_argument("flavor", choices=["ldd", "expander", "edt"])
    p.add_argument("graph")
    p.add_argument("--eps", required=True)
    p.add_argument("--variant", choices=["A", "B"], default="A")
    p.add_argument("--overlap", action="store_true")
    p.add_argument("--trace-csv", default=None)
    common(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("route", help="balance | walk information gathering")
    p.add_argument("engine", choices=["balance", "walk"])
    p.add_argument("graph")
    p.add_argument("--f", default=None, help="failure fraction (default full delivery)")
    p.add_argument("--v-star", type=int, default=None)
    p.add_argument("--walk-c", type=int, default=4)
    p.add_argument("--schedule-out", default=None)
    common(p)
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("approx", help="maxcut | mis | matching | vc")
    p.add_argument("problem", choices=["maxcut", "mis", "matching", "vc"])
    p.add_argument("graph")
    p.add_argument("--eps", required=True)
    common(p)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("test", help="property testing")
    p.add_argument("property", choices=["planarity", "forest", "outerplanar"])
    p.add_argument("graph")
    p.add_argument("--eps", required=True)
    common(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("verify", help="check a decomposition file")
    p.add_argument("graph")
    p.add_argument("--edt", required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--d-cap", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="run a config set, emit CSV")
    p.add_argument("--config", default=None)
    common(p)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code else 0
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (HeavyStarsViolation, GatherProgressError, ScheduleSearchError,
            DecompositionError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        if getattr(args, "output", None):
            with open(args.output + ".witness", "w") as f:
                json.dump({"error": str(exc), "type": type(exc).__name__}, f)
        return INVARIANT_ERROR


if __name__ == "__main__":
    sys.exit(main())
