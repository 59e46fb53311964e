import json

import pytest

from minordecomp import sim
from minordecomp.graph import Graph
from minordecomp import generators as gen


class BroadcastBit:
    """Node 0 floods one bit; nodes forward only on ports that did not
    deliver it, so the far end never sends."""

    def initialize(self, ctx):
        return {"deg": ctx.degree, "known": ctx.node == 0, "sent": False}

    def step(self, st, rnd, inbox):
        fresh = set(range(st["deg"]))
        if inbox:
            st["known"] = True
            fresh -= set(inbox)
        out = {}
        if st["known"] and not st["sent"]:
            st["sent"] = True
            out = {p: (1,) for p in fresh}
        if st["known"]:
            return sim.StepResult(st, outbox=out, halted=True, output=1)
        return sim.StepResult(st, wake_at=sim.WAKE_ON_MESSAGE)


class Echo:
    def initialize(self, ctx):
        return None

    def step(self, st, rnd, inbox):
        return sim.StepResult(st, halted=True, output=0)


class FloodMax:
    """Every node floods the largest identifier it has seen; improvements
    forward everywhere except the ports they arrived on."""

    def initialize(self, ctx):
        return {"deg": ctx.degree, "best": ctx.ident, "n": ctx.n}

    def step(self, st, rnd, inbox):
        arrived = set()
        improved = False
        for p, msg in sorted(inbox.items()):
            if msg[0] > st["best"]:
                st["best"] = msg[0]
                improved = True
                arrived = {p}
            elif msg[0] == st["best"]:
                arrived.add(p)
        if rnd == 0:
            out = {p: (st["best"],) for p in range(st["deg"])}
        elif improved:
            out = {p: (st["best"],) for p in range(st["deg"]) if p not in arrived}
        else:
            out = {}
        if rnd >= st["n"] // 2:
            return sim.StepResult(st, outbox=out, halted=True, output=st["best"])
        return sim.StepResult(st, outbox=out)


def test_broadcast_p5_rounds():
    tr = sim.run(gen.path(5), BroadcastBit(), sim.config_fitting(5, fields=1))
    assert tr.rounds_used == 4
    assert all(v == 1 for v in tr.outputs.values())


def test_echo_zero_rounds():
    tr = sim.run(gen.path(5), Echo(), sim.config_fitting(5, fields=1))
    assert tr.rounds_used == 0
    assert tr.total_messages == 0


def test_flood_c8():
    tr = sim.run(gen.cycle(8), FloodMax(), sim.config_fitting(8, fields=1))
    assert set(tr.outputs.values()) == {7}
    assert tr.rounds_used == 4  # ceil(8/2) hops of useful flooding


def test_determinism_byte_identical():
    cfg = sim.config_fitting(8, fields=1)
    a = sim.run(gen.cycle(8), FloodMax(), cfg).to_json()
    b = sim.run(gen.cycle(8), FloodMax(), cfg).to_json()
    assert a == b


def test_causality_radius():
    """A node's output after t rounds depends only on its radius-t ball."""
    base = gen.path(7)
    # modify outside the radius-2 ball of node 0: rewire far end
    altered = Graph(7, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (4, 6)])

    class TwoRound:
        def initialize(self, ctx):
            return {"deg": ctx.degree, "seen": [ctx.ident]}

        def step(self, st, rnd, inbox):
            for p, m in sorted(inbox.items()):
                st["seen"].append(m[0])
            out = {p: (min(st["seen"]),) for p in range(st["deg"])}
            if rnd >= 2:
                return sim.StepResult(st, halted=True, output=tuple(sorted(st["seen"])))
            return sim.StepResult(st, outbox=out)

    cfg = sim.config_fitting(7, fields=1)
    out_a = sim.run(base, TwoRound(), cfg).outputs[0]
    out_b = sim.run(altered, TwoRound(), cfg).outputs[0]
    assert out_a == out_b


def test_strict_budget_violation():
    class Fat:
        def initialize(self, ctx):
            return ctx.degree

        def step(self, st, rnd, inbox):
            return sim.StepResult(st, outbox={0: tuple(range(40))}, halted=True)

    with pytest.raises(sim.SimError):
        sim.run(gen.path(2), Fat(), sim.SimConfig(mode=sim.STRICT))
    tr = sim.run(gen.path(2), Fat(), sim.SimConfig(mode=sim.ACCOUNTING))
    assert len(tr.violations) == 2
    assert tr.violations[0]["bits"] == 64 * 40


def test_bit_accounting_matches_serialization():
    class OneTuple:
        def initialize(self, ctx):
            return ctx.degree

        def step(self, st, rnd, inbox):
            if rnd == 0 and st > 0:
                return sim.StepResult(st, outbox={0: (1, 2, 3)})
            return sim.StepResult(st, halted=True)

    tr = sim.run(gen.path(2), OneTuple(), sim.config_fitting(2, fields=3))
    assert tr.max_bits == 64 * 3


def test_round_cap():
    class Forever:
        def initialize(self, ctx):
            return ctx.degree

        def step(self, st, rnd, inbox):
            return sim.StepResult(st, outbox={0: (1,)} if st else {})

    with pytest.raises(sim.SimError):
        sim.run(gen.path(2), Forever(),
                sim.SimConfig(b_mult=64, max_rounds=50))


def test_program_error_carries_location():
    class Boom:
        def initialize(self, ctx):
            return ctx.node

        def step(self, st, rnd, inbox):
            if st == 3 and rnd == 2:
                raise RuntimeError("exploded")
            return sim.StepResult(st)

    with pytest.raises(sim.SimError) as err:
        sim.run(gen.path(5), Boom(), sim.SimConfig(max_rounds=10))
    assert err.value.node == 3 and err.value.round_index == 2


def test_charged_run_formula():
    class OneRound:
        def initialize(self, ctx):
            return ctx.degree

        def step(self, st, rnd, inbox):
            out = {0: (1,)} if rnd == 0 and st else {}
            return sim.StepResult(st, outbox=out, halted=rnd >= 1)

    costs = sim.ClusterRoundCost(diameter=3, congestion=1)
    tr = sim.run_charged(gen.path(2), OneRound(), costs,
                         sim.config_fitting(2, fields=1))
    assert tr.rounds_used == 1
    assert tr.charged_rounds == 2 * (3 + 1) * 1  # one virtual round

    costs4 = sim.ClusterRoundCost(diameter=3, congestion=4)
    tr4 = sim.run_charged(gen.path(2), OneRound(), costs4,
                          sim.config_fitting(2, fields=1))
    assert tr4.charged_rounds == 4 * tr.charged_rounds


def test_transcript_json_schema():
    tr = sim.run(gen.path(3), Echo(), sim.config_fitting(3, fields=1))
    data = json.loads(tr.to_json())
    assert set(data) >= {"rounds", "max_bits", "violations", "outputs"}
