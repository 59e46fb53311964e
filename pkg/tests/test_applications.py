import math
from fractions import Fraction

import numpy as np
import pytest

from minordecomp.graph import Graph
from minordecomp import generators as gen
from minordecomp import solvers
from minordecomp.solvers import OracleFailure
from minordecomp.sparsify import sparsify
from minordecomp.approx import (approx_max_cut, approx_mis, approx_matching,
                                approx_vc, ldd_distributed,
                                expander_decomp_distributed)
from minordecomp.proptest import (be_forest_decomposition,
                                  union_of_clusters_satisfies)
from minordecomp.proptest import test_property as run_property_test

from conftest import mis_oracle


# -- exact solvers -----------------------------------------------------------------

def test_mis_solvers_agree_with_oracle():
    rng = np.random.default_rng(4)
    for _ in range(25):
        n = int(rng.integers(4, 13))
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)
                 if rng.random() < 0.3]
        g = Graph(n, edges)
        want = mis_oracle(g)
        got = solvers.mis_exact(g)
        assert len(got) == want
        assert solvers.is_independent(g, got)
        cover = solvers.vc_exact(g)
        assert solvers.is_vertex_cover(g, cover)
        assert len(cover) == n - want


def test_mis_closed_forms():
    assert len(solvers.mis_exact(gen.path(10))) == 5
    assert len(solvers.mis_exact(gen.path(11))) == 6
    assert len(solvers.mis_exact(gen.cycle(6))) == 3
    assert len(solvers.mis_exact(gen.cycle(7))) == 3
    assert len(solvers.mis_exact(gen.grid(4, 5))) == 10


def test_bipartite_koenig_route():
    g = gen.grid(5, 5)  # bipartite, 25 > branch-and-bound cap
    got = solvers.mis_bipartite(g)
    assert solvers.is_independent(g, got)
    assert len(got) == 13


def test_matching_solver():
    assert len(solvers.max_matching(gen.path(10))) == 5
    assert len(solvers.max_matching(gen.cycle(7))) == 3
    assert len(solvers.max_matching(gen.star(9))) == 1


def test_maxcut_solver():
    val, side = solvers.max_cut_exact(gen.cycle(4))
    assert val == 4 and solvers.cut_size(gen.cycle(4), side) == 4
    val, _ = solvers.max_cut_exact(gen.cycle(5))
    assert val == 4
    val, _ = solvers.max_cut_exact(gen.complete(4))
    assert val == 4
    with pytest.raises(OracleFailure):
        solvers.max_cut_exact(gen.k5_planted(30, 1, 1), cap=20)


# -- sparsifiers --------------------------------------------------------------------

def test_sparsifier_inactive_below_threshold():
    g = gen.grid(4, 4)  # max degree 4 < d
    sp = sparsify(g, Fraction(1, 2), "vc", alpha=3)
    assert sp.v_high == frozenset()
    assert sp.graph.m == g.m


def test_sparsifier_matching_star():
    g = gen.star(10)
    sp = sparsify(g, Fraction(1, 3), "matching", alpha=1, c_vc=1)  # d = 3
    assert sp.graph.m <= 3
    assert sp.graph.max_degree <= sp.d


def test_sparsifier_mis_star():
    g = gen.star(10)
    sp = sparsify(g, Fraction(1, 3), "mis", alpha=1, c_mis=1)  # d = 3
    assert 0 in sp.v_high
    assert sp.v_low == frozenset(range(1, 11))


# -- approximation ------------------------------------------------------------------

def test_maxcut_bipartite_instances():
    r = approx_max_cut(gen.cycle(4), Fraction(2, 5))
    assert r.value == r.opt == 4
    r = approx_max_cut(gen.path(10), Fraction(2, 5))
    assert r.value == r.opt == 9


def test_maxcut_small_brute():
    g = gen.random_planar(14, 6)
    r = approx_max_cut(g, Fraction(1, 2))
    assert r.opt_kind in ("brute", "closed-form")
    assert r.value >= (1 - Fraction(1, 2)) * r.opt


def test_mis_examples():
    r = approx_mis(gen.cycle(6), Fraction(3, 10))
    assert solvers.is_independent(gen.cycle(6), r.solution)
    assert r.value >= (1 - 0.3) * 3
    for n in (10, 20, 50):
        r = approx_mis(gen.path(n), Fraction(3, 10))
        assert r.feasible
        assert r.value >= (1 - 0.3) * math.ceil(n / 2)


def test_mis_empty_graph():
    g = Graph(5, [])
    r = approx_mis(g, Fraction(3, 10))
    assert r.value == 5 and r.feasible


def test_matching_vc_examples():
    r = approx_matching(gen.path(10), Fraction(3, 10))
    assert r.feasible and r.value >= (1 - 0.3) * 5
    r = approx_vc(gen.star(9), Fraction(1, 4))
    assert r.feasible
    assert r.value <= (1 + 0.25) * 1 + 1  # cover {center} plus slack
    single = Graph(2, [(0, 1)])
    rm = approx_matching(single, Fraction(1, 4))
    rv = approx_vc(single, Fraction(1, 4))
    assert rm.value == 1 and rv.value >= 1 and rv.feasible


def test_feasibility_on_non_minor_free_input():
    g = gen.k5_planted(20, 2, 2)
    for fn in (approx_mis, approx_matching, approx_vc):
        try:
            r = fn(g, Fraction(1, 3))
        except Exception:
            continue  # an explicit failure is acceptable; silence is not
        assert r.feasible


def test_ratio_against_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(4):
        g = gen.random_planar(16, int(rng.integers(10**6)))
        opt = mis_oracle(g)
        r = approx_mis(g, Fraction(3, 10))
        assert r.feasible
        assert r.value >= (1 - 0.3) * opt


def test_ldd_wrapper():
    pieces, info = ldd_distributed(gen.grid(6, 6), Fraction(1, 4))
    assert info["eps_measured"] <= Fraction(1, 4)
    assert {v for p in pieces for v in p} == set(range(36))


def test_expander_wrapper_plain():
    pieces, info = expander_decomp_distributed(gen.grid(6, 6), Fraction(1, 4),
                                               flavor="plain")
    assert info["fraction"] <= Fraction(1, 4)
    for i, cert in info["certificates"].items():
        assert cert > 0


def test_expander_wrapper_overlap():
    pieces, info = expander_decomp_distributed(gen.grid(5, 5), Fraction(1, 4),
                                               flavor="overlap")
    assert info["fraction"] <= Fraction(1, 4)
    assert info["overlap"] >= 1


# -- forest decomposition and property testing ---------------------------------------

def test_be_tree():
    g = gen.random_tree(30, 2)
    be = be_forest_decomposition(g, 1)
    assert not be.rejects
    assert be.max_outdegree <= 3
    assert len(be.orientation) == g.m


def test_be_k5_alpha1():
    be = be_forest_decomposition(gen.complete(5), 1)
    assert be.rejects == set(range(5))  # degree 4 > 3 forever


def test_be_single_vertex():
    be = be_forest_decomposition(Graph(1, []), 1)
    assert not be.rejects


def test_be_planar_alpha3(planar_corpus):
    for name, g in planar_corpus:
        be = be_forest_decomposition(g, 3)
        assert not be.rejects, name
        assert be.max_outdegree <= 9, name


def test_be_acyclic_orientation():
    g = gen.grid(5, 5)
    be = be_forest_decomposition(g, 3)
    # follow edges along the orientation: level strictly non-decreasing and
    # ids increase within a level, so no directed cycle exists
    for ei, head in be.orientation.items():
        u, v = g.edges[ei]
        tail = u if head == v else v
        lu, lv = be.levels[tail], be.levels[head]
        assert lu < lv or (lu == lv and tail < head)


def test_property_tester_accepts_planar():
    for g in (gen.grid(5, 5), gen.random_tree(20, 3), gen.random_planar(24, 8)):
        v = run_property_test(g, Fraction(1, 4), "planarity")
        assert v.accepted and not v.rejects


def test_property_tester_rejects_k5_gadgets():
    g = gen.k5_planted(15, 4, 6)
    v = run_property_test(g, Fraction(1, 16), "planarity")
    assert not v.accepted
    assert v.first_reject is not None
    rnd, node, reason = v.first_reject
    assert reason in ("arboricity-overflow", "degree-law-violation",
                      "local-property-failure", "oracle-failure", "time-limit")


def test_property_tester_forest():
    v = run_property_test(gen.random_tree(25, 7), Fraction(1, 4), "forest")
    assert v.accepted
    # a clique is far from being a forest at small eps
    v = run_property_test(gen.complete(8), Fraction(1, 8), "forest")
    assert not v.accepted


def test_property_tester_outerplanar():
    v = run_property_test(gen.cycle(12), Fraction(1, 4), "outerplanar")
    assert v.accepted


def test_acceptance_soundness_bookkeeping():
    g = gen.grid(5, 5)
    v = run_property_test(g, Fraction(1, 4), "planarity")
    assert v.accepted
    assert v.fraction <= Fraction(1, 8)
    clusters = [frozenset(c) for c in v.details["final_clusters"]]
    assert union_of_clusters_satisfies(g, clusters, "planarity")


def test_verdict_json():
    import json
    v = run_property_test(gen.path(6), Fraction(1, 4), "forest")
    data = json.loads(v.to_json())
    assert data["accepted"] is True and data["rejects"] == []
