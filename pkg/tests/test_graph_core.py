import math
from fractions import Fraction

import numpy as np
import pytest

from minordecomp.graph import Graph, read_edge_list, write_edge_list, parse_fraction
from minordecomp.measures import (volume, boundary_size, conductance_of_set,
                                  conductance_exact, sparsity_of_set,
                                  sparsity_exact, diameter_of_induced,
                                  conductance_sweep_lower_bound, CapacityError,
                                  INFINITE)
from minordecomp.split import expander_split, regularize_even
from minordecomp.arboricity import arboricity_exact, _densest_violation_enum, _feasible_flow
from minordecomp.ldd import ldd_sequential, cut_edges_of_partition
from minordecomp import generators as gen
from minordecomp.planarity import is_planar, is_forest, is_outerplanar

from conftest import conductance_oracle, sparsity_oracle, arboricity_oracle


def test_degree_convention_self_loops():
    g = Graph(2, [(0, 1), (0, 0)])
    assert g.degree(0) == 2  # the loop contributes one
    assert g.degree(1) == 1
    assert volume(g, {0}) == 2


def test_volume_examples():
    assert volume(gen.path(2), {0}) == 1
    assert volume(gen.cycle(4), {0, 1}) == 4
    g = gen.grid(5, 5)
    assert volume(g, range(25)) == 2 * g.m == 80


def test_boundary_examples():
    c4 = gen.cycle(4)
    assert boundary_size(c4, {0, 1}) == 2
    assert boundary_size(c4, {0}) == 2
    g = gen.grid(5, 5)
    left2 = {y * 5 + x for y in range(5) for x in range(2)}
    assert boundary_size(g, left2) == 5
    assert boundary_size(Graph(2, [(0, 0), (0, 1)]), {0}) == 1  # loop ignored


def test_conductance_of_set_examples():
    assert conductance_of_set(gen.path(2), {0}) == 1
    c4 = gen.cycle(4)
    assert conductance_of_set(c4, {0, 1}) == Fraction(1, 2)
    assert conductance_of_set(c4, {0}) == 1
    with pytest.raises(ValueError):
        conductance_of_set(c4, set())
    with pytest.raises(ValueError):
        conductance_of_set(c4, set(range(4)))


def test_conductance_exact_examples():
    assert conductance_exact(gen.path(2))[0] == 1
    assert conductance_exact(gen.cycle(4))[0] == Fraction(1, 2)
    # every cut of P3 pays full boundary against the smaller side
    assert conductance_exact(gen.path(3))[0] == 1


def test_exact_matches_oracle(small_corpus):
    for name, g in small_corpus:
        if g.n > 10:
            continue
        assert conductance_exact(g)[0] == conductance_oracle(g), name
        assert sparsity_exact(g)[0] == sparsity_oracle(g), name


def test_exact_cut_is_witness():
    g = gen.grid(3, 3)
    val, cut = conductance_exact(g)
    assert conductance_of_set(g, cut) == val


def test_conductance_cap():
    with pytest.raises(CapacityError):
        conductance_exact(gen.grid(5, 5))


def test_sparsity_examples():
    assert sparsity_of_set(gen.path(2), {0}) == 1
    assert sparsity_of_set(gen.cycle(4), {0, 1}) == 1
    assert sparsity_of_set(gen.star(4), {0}) == 4


def test_conductance_sparsity_sandwich():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 200:
        n = int(rng.integers(4, 17))
        g = gen.random_planar(n, int(rng.integers(0, 10**6)))
        size = int(rng.integers(1, n))
        s = set(int(v) for v in rng.choice(n, size=size, replace=False))
        if len(s) in (0, n):
            continue
        if volume(g, s) == 0 or volume(g, set(range(n)) - s) == 0:
            continue
        phi = conductance_of_set(g, s)
        psi = sparsity_of_set(g, s)
        assert phi <= psi <= g.max_degree * phi
        checked += 1


def test_sweep_bound_is_sound():
    g = gen.grid(5, 5)
    info = conductance_sweep_lower_bound(g)
    assert info["exact"] is False
    assert info["cut_value"] is not None
    # the sweep value upper-bounds the true minimum; the spectral value
    # lower-bounds it (checked on a brute-forceable instance)
    g2 = gen.grid(3, 3)
    info2 = conductance_sweep_lower_bound(g2)
    exact = conductance_exact(g2)[0]
    assert info2["cut_value"] >= exact
    assert Fraction(info2["lower"]).limit_denominator(10**9) <= exact


# -- expander split ---------------------------------------------------------------

def test_split_k2():
    sp, smap = expander_split(gen.path(2))
    assert sp.n == 2 and sp.m == 1
    assert smap.backward == ((0, 0), (1, 0))


def test_split_p3_is_p4():
    sp, _ = expander_split(gen.path(3))
    assert sp.n == 4
    layers = sp.bfs_layers(min(v for v in range(4) if sp.degree(v) == 1))
    assert max(layers.values()) == 3  # a path on four vertices


def test_split_c4_band():
    c4 = gen.cycle(4)
    sp, _ = expander_split(c4)
    assert sp.n == 8 and sp.max_degree == 2
    ratio = sparsity_exact(sp)[0] / conductance_exact(c4)[0]
    assert Fraction(1, 16) <= ratio <= 16


def test_split_edge_count_and_roundtrip(small_corpus):
    for name, g in small_corpus:
        sp, smap = expander_split(g)
        gadget_edges = sp.m - g.m
        assert sp.m == g.m + gadget_edges
        for x in range(sp.n):
            v, r = smap.backward[x]
            assert smap.slot(v, r) == x, name
        assert sp.max_degree <= 5, name


def test_split_gadget_conductance_constant():
    # the gadget itself has constant conductance for every degree up to 12
    from minordecomp.split import _gadget_edges
    for d in range(3, 13):
        gadget = Graph(d, _gadget_edges(0, d))
        val, _ = conductance_exact(gadget)
        assert val >= Fraction(1, 5), d  # measured minimum is 2/9 at d = 12


def test_regularize_even():
    k2 = gen.path(2)
    r = regularize_even(k2, 2)
    assert list(r.degrees) == [2, 2]
    sp, _ = expander_split(gen.cycle(4))
    r = regularize_even(sp, 4)
    assert set(int(x) for x in r.degrees) == {4}
    already = gen.cycle(4)
    assert regularize_even(already, 2).edges == already.edges
    with pytest.raises(ValueError):
        regularize_even(k2, 3)
    with pytest.raises(ValueError):
        regularize_even(gen.star(3), 2)


# -- arboricity -------------------------------------------------------------------

def test_arboricity_examples():
    assert arboricity_exact(gen.random_tree(12, 0)) == 1
    assert arboricity_exact(gen.complete(4)) == 2
    assert arboricity_exact(gen.grid(5, 5)) == 2


def test_arboricity_enum_vs_flow():
    rng = np.random.default_rng(3)
    for _ in range(25):
        n = int(rng.integers(4, 11))
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)
                 if rng.random() < 0.45]
        if not edges:
            continue
        g = Graph(n, edges)
        want = arboricity_oracle(g)
        assert arboricity_exact(g, enum_cap=0) == want  # force the flow path
        assert arboricity_exact(g) == want


def test_arboricity_planar_bound(planar_corpus):
    for name, g in planar_corpus:
        assert arboricity_exact(g) <= 3, name


def test_arboricity_rejects_self_loops():
    with pytest.raises(ValueError):
        arboricity_exact(Graph(2, [(0, 0), (0, 1)]))


# -- band-chop decomposition --------------------------------------------------------

def test_ldd_path_example():
    pieces = ldd_sequential(gen.path(10), Fraction(1, 2), 1)
    assert len(cut_edges_of_partition(gen.path(10), pieces)) <= 2
    for p in pieces:
        assert len(p) <= 8
        assert diameter_of_induced(gen.path(10), p) <= 7


def test_ldd_small_diameter_is_single_cluster():
    g = gen.grid(3, 3)  # diameter 4 <= 4/eps for eps = 1/2
    pieces = ldd_sequential(g, Fraction(1, 2), 3)
    assert len(pieces) == 1


def test_ldd_partition_and_diameter_contract():
    g = gen.grid(10, 10)
    eps = Fraction(1, 2)
    pieces = ldd_sequential(g, eps, 2)
    seen = set()
    for p in pieces:
        assert not (seen & p)
        seen |= p
    assert seen == set(range(g.n))
    bound = 2 * 2 * math.ceil(4 / eps)
    for p in pieces:
        assert diameter_of_induced(g, p) <= bound
    frac = Fraction(len(cut_edges_of_partition(g, pieces)), g.m)
    assert frac <= Fraction(1, 2)


def test_ldd_cut_sets_disjoint_across_branches():
    g = gen.grid(8, 8)
    pieces = ldd_sequential(g, Fraction(1, 3), 3)
    cut = cut_edges_of_partition(g, pieces)
    assert len(cut) == len(set(cut))


# -- diameters, generators, io ------------------------------------------------------

def test_diameter_examples():
    g = gen.cycle(4)
    assert diameter_of_induced(g, {0}) == 0
    assert diameter_of_induced(gen.path(5), range(5)) == 4
    assert diameter_of_induced(g, {0, 2}) == INFINITE


def test_generators():
    g22 = gen.grid(2, 2)  # a 4-cycle: connected, all degrees two
    assert g22.n == 4 and g22.m == 4
    assert set(int(d) for d in g22.degrees) == {2}
    assert len(g22.connected_components()) == 1
    p1 = gen.path(1)
    assert p1.n == 1 and p1.m == 0
    t = gen.random_tree(40, 9)
    assert t.m == 39 and len(t.connected_components()) == 1
    with pytest.raises(ValueError):
        gen.random_regular(5, 3, 0)  # odd n*d


def test_generator_minor_freeness_status():
    for g in (gen.grid(4, 4), gen.random_planar(40, 2), gen.random_tree(20, 0)):
        assert is_planar(g)
    assert not is_planar(gen.k5_planted(50, 7, 1))
    assert not is_planar(gen.complete(5))


def test_generators_deterministic():
    assert gen.random_planar(30, 5).edges == gen.random_planar(30, 5).edges
    assert gen.random_regular(12, 3, 4).edges == gen.random_regular(12, 3, 4).edges
    assert gen.k5_planted(20, 1, 2).edges == gen.k5_planted(20, 1, 2).edges


def test_edge_list_roundtrip(tmp_path):
    g = gen.k5_planted(15, 2, 1)
    path = tmp_path / "g.txt"
    write_edge_list(g, str(path))
    h = read_edge_list(str(path))
    assert h.n == g.n and h.edges == g.edges
    assert path.read_text().splitlines()[0] == f"# {g.n} {g.m}"


def test_parse_fraction():
    assert parse_fraction("1/4") == Fraction(1, 4)
    assert parse_fraction("0.25") == Fraction(1, 4)


def test_property_predicates():
    assert is_forest(gen.random_tree(10, 1))
    assert not is_forest(gen.cycle(5))
    assert is_outerplanar(gen.cycle(8))
    assert not is_outerplanar(gen.complete(4))
    assert is_planar(gen.complete(4))


def test_minor_free_degree_law():
    # planar expanders concentrate degree: Delta >= phi^2 n / c_hat for a
    # corpus-fitted c_hat, reported here against a generous ceiling
    worst = Fraction(0)
    for seed in range(8):
        g = gen.random_planar(10, seed)
        if len(g.connected_components()) > 1:
            continue
        phi = conductance_exact(g)[0]
        need = phi * phi * g.n / g.max_degree
        worst = max(worst, need)
    assert worst <= 16  # fitted constant c_hat
