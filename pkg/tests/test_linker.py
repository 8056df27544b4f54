import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from brute import brute_hamilton, hall_ok, selection_exists
from rainbowham.core import RandomSource
from rainbowham.errors import DegenerateInstanceError, InternalInconsistencyError
from rainbowham.linker import (
    Gamma,
    Generation,
    HallWitness,
    PruneFailure,
    Pruned,
    Selection,
    build_gamma,
    hamilton_digraph,
    is_hamilton_cycle,
    prune_conflicts,
    random_gamma,
    sample_gamma,
    select_rainbow_3in3out,
    stitch_cycle,
)
from rainbowham.params import explicit_parameters
from rainbowham.sampler import merge_to_colored_graph, sample_from_arcs
from rainbowham.segments import split_into_segments


def make_gamma(r, gens, F2=()):
    """Gamma from (kind, owner, other, color) tuples; conflicting repeats go to F2."""
    out = {k: [] for k in range(r)}
    inn = {k: [] for k in range(r)}
    lst = []
    for kind, owner, other, color in gens:
        arc = (owner, other) if kind == "out" else (other, owner)
        g = Generation(arc, color, kind, owner, arc)
        lst.append(g)
        (out if kind == "out" else inn)[owner].append(g)
    first, F1 = {}, set()
    for g in lst:
        if g.arc in first:
            F1.add(g)
        first.setdefault(g.arc, g.color)
    f2 = {g for g in lst if first[g.arc] != g.color} | {lst[i] for i in F2}
    return Gamma(r, list(range(r)), lst, out, inn, F1, f2)


def full_gamma(r=7):
    """Out-arcs to k+1..k+3 and in-arcs from k+1..k+3: 6r distinct arcs, fresh colors."""
    c = itertools.count(1)
    gens = []
    for k in range(r):
        gens += [("out", k, (k + t) % r, next(c)) for t in (1, 2, 3)]
        gens += [("in", k, (k + t) % r, next(c)) for t in (1, 2, 3)]
    return make_gamma(r, gens)


def check_selection(gamma, sel, per_node=3):
    assert isinstance(sel, Selection)
    for k in range(gamma.r):
        assert len(sel.out[k]) == per_node and len(sel.inn[k]) == per_node
        assert all(g in gamma.out_gens[k] for g in sel.out[k])
        assert all(g in gamma.in_gens[k] for g in sel.inn[k])
    assert len(sel.colors) == len(set(sel.colors)) == 2 * per_node * gamma.r


def check_witness(gamma, w, per_node=3):
    assert isinstance(w, HallWitness)
    cols = set()
    for k, side in w.nodes:
        pool = gamma.out_gens[k] if side == "+" else gamma.in_gens[k]
        cols |= {g.color for g in pool}
    assert cols == w.colors
    assert len(cols) < per_node * len(w.nodes)


# -- sampling -----------------------------------------------------------------


def test_gamma_needs_three_vertices():
    with pytest.raises(DegenerateInstanceError):
        sample_gamma(2, [1, 1], [1, 1], range(1, 10), RandomSource(0))
    ps = explicit_parameters(4, 0.1, 0.1, 0.1, 12)
    s = sample_from_arcs(ps, {})
    with pytest.raises(DegenerateInstanceError):
        build_gamma(split_into_segments(list(range(1, 5)), [5, 6, 7], 2), s)


def test_sample_gamma_replay():
    # the same draws made by hand, in order: target then color
    r, colors = 3, range(1, 31)
    g = sample_gamma(r, [1] * r, [1] * r, colors, RandomSource(9, "golden"))
    gen = RandomSource(9, "golden").generator
    want = []
    for k in range(r):
        for kind in ("out", "in"):
            j = int(gen.integers(r - 1))
            j += j >= k
            c = colors[int(gen.integers(len(colors)))]
            want.append(((k, j) if kind == "out" else (j, k), c, kind, k))
    assert [(x.arc, x.color, x.kind, x.owner) for x in g.gens] == want
    assert g.degrees() == (1, 1)


def test_sample_gamma_zero_degree():
    g = sample_gamma(5, [0] * 5, [0] * 5, range(1, 10), RandomSource(0))
    assert g.gens == [] and g.E1 == set()


def test_sample_gamma_duplicates_in_F1():
    g = sample_gamma(3, [6] * 3, [6] * 3, range(1, 100), RandomSource(1))
    # 36 generations over 6 possible arcs
    assert len(g.F1) == len(g.gens) - len(g.E1) == 30
    assert all(a != b for a, b in g.E1)


def four_segments():
    """P = 1..8 split as [1,2] [4,3] [5,6] [8,7]; D1 closes 1,2,4,3,5,6,8,7."""
    ps = explicit_parameters(8, 0.1, 0.1, 0.1, 300, c1=100, c3=100)
    P = list(range(1, 9))
    pcol = [100 + i for i in range(1, 8)]
    d1 = [(2, 4, 1), (3, 5, 2), (6, 8, 3), (7, 1, 4)]
    return ps, P, pcol, d1


def test_build_gamma_and_stitch():
    ps, P, pcol, d1 = four_segments()
    s = sample_from_arcs(ps, {1: d1, 2: [(u, u + 1, c) for u, c in zip(P, pcol)]})
    sys_ = split_into_segments(P, pcol, 2)
    gamma = build_gamma(sys_, s)
    assert gamma.E1 == {(0, 1), (1, 2), (2, 3), (3, 0)}
    assert gamma.F1 == set() and gamma.F2 == set()
    colors = {g.arc: g.color for g in gamma.gens}
    cert = stitch_cycle(sys_, gamma, [0, 1, 2, 3], colors, merge_to_colored_graph(s))
    assert list(cert.order) == [1, 2, 4, 3, 5, 6, 8, 7]
    assert list(cert.colors) == [101, 1, 103, 2, 105, 3, 107, 4]


def test_stitch_rejects_missing_edge():
    ps, P, pcol, d1 = four_segments()
    s = sample_from_arcs(ps, {1: d1[:3], 2: [(u, u + 1, c) for u, c in zip(P, pcol)]})
    sys_ = split_into_segments(P, pcol, 2)
    gamma = build_gamma(sys_, s)
    colors = {g.arc: g.color for g in gamma.gens}
    colors[(3, 0)] = 4
    with pytest.raises(InternalInconsistencyError):
        stitch_cycle(sys_, gamma, [0, 1, 2, 3], colors, merge_to_colored_graph(s))


def test_build_gamma_duplicates_and_coin_losers():
    ps, P, pcol, d1 = four_segments()
    # 1 -> 3 is a0 -> b1: an in-generation of segment 0 duplicating nothing yet;
    # 3 -> 1 is b1 -> a0, the same Γ arc (1, 0) generated again
    # 4 -> 2 reverses 2 -> 4 and loses the coin
    extra = [(1, 3, 5), (3, 1, 6), (4, 2, 7)]
    s = sample_from_arcs(ps, {1: d1 + extra}, coins={(1, 3): True, (2, 4): True})
    sys_ = split_into_segments(P, pcol, 2)
    gamma = build_gamma(sys_, s)
    assert sorted(g.arc for g in gamma.F1) == [(0, 1), (1, 0)]
    assert {g.source for g in gamma.F2} == {(3, 1), (4, 2)}


# -- rainbow selection ---------------------------------------------------------


def test_selection_distinct_colors():
    gamma = full_gamma()
    assert gamma.F1 == set()
    sel = select_rainbow_3in3out(gamma)
    check_selection(gamma, sel)


def test_selection_single_color_gives_witness():
    gens = [(kind, k, (k + 1) % 3 if kind == "out" else (k + 2) % 3, 7) for k in range(3) for kind in ("out", "in")]
    gamma = make_gamma(3, gens * 3)
    w = select_rainbow_3in3out(gamma)
    check_witness(gamma, w)
    assert w.colors == {7}


def test_witness_pins_one_side():
    gamma = full_gamma()
    # replace vertex 1's out-colors with two colors only
    for i, g in enumerate(gamma.out_gens[1]):
        gamma.out_gens[1][i] = Generation(g.arc, 500 + min(i, 1), "out", 1, g.source)
    w = select_rainbow_3in3out(gamma)
    check_witness(gamma, w)
    assert (1, "+") in w.nodes


@st.composite
def tiny_gammas(draw):
    r = draw(st.integers(3, 4))
    ncol = draw(st.integers(6, 30))
    gens = []
    for k in range(r):
        for kind in ("out", "in"):
            for _ in range(draw(st.integers(0, 5))):
                other = draw(st.sampled_from([j for j in range(r) if j != k]))
                gens.append((kind, k, other, draw(st.integers(1, ncol))))
    return make_gamma(r, gens)


@settings(max_examples=150)
@given(tiny_gammas())
def test_selection_matches_hall_brute_force(gamma):
    res = select_rainbow_3in3out(gamma)
    assert hall_ok(gamma) == selection_exists(gamma)
    if hall_ok(gamma):
        check_selection(gamma, res)
    else:
        check_witness(gamma, res)


@settings(max_examples=40)
@given(st.integers(3, 12), st.integers(3, 8), st.integers(0, 10**6))
def test_selection_plenty_of_colors(r, d, seed):
    g = sample_gamma(r, [d] * r, [d] * r, range(1, 10**6), RandomSource(seed))
    res = select_rainbow_3in3out(g)
    # 2rd draws from a million colors: all distinct, so Hall holds trivially
    if len({x.color for x in g.gens}) == len(g.gens):
        check_selection(g, res)


# -- pruning -------------------------------------------------------------------


def test_prune_without_conflicts_keeps_everything():
    gamma = full_gamma()
    sel = select_rainbow_3in3out(gamma)
    res = prune_conflicts(gamma, sel)
    assert isinstance(res, Pruned)
    assert len(res.arcs) == 42 and res.dropped == {}
    assert res.arcs == {g.arc: g.color for g in gamma.gens}


def test_prune_one_and_two_drops():
    gamma = full_gamma()
    sel = select_rainbow_3in3out(gamma)
    victim = sel.out[0]
    gamma.F2 = {victim[0]}
    res = prune_conflicts(gamma, sel)
    assert isinstance(res, Pruned) and res.dropped == {"missing-edge": 1}
    gamma.F2 = {victim[0], victim[1]}
    res = prune_conflicts(gamma, sel)
    assert isinstance(res, PruneFailure)
    assert (res.vertex, res.side) == (0, "out")


def test_prune_drop_regenerated():
    gamma = sample_gamma(3, [6] * 3, [6] * 3, range(1, 10**6), RandomSource(2))
    sel = select_rainbow_3in3out(gamma)
    # every arc is generated many times over at r = 3, mostly in other colors
    assert len(gamma.F2) > 0
    assert isinstance(prune_conflicts(gamma, sel, drop_regenerated=True), PruneFailure)


def test_uniform_model_conflicts_are_dropped():
    for seed in range(30):
        gamma = sample_gamma(8, [4] * 8, [4] * 8, range(1, 200), RandomSource(seed))
        sel = select_rainbow_3in3out(gamma)
        if isinstance(sel, Selection):
            res = prune_conflicts(gamma, sel)
            if isinstance(res, Pruned):
                assert all(c == next(g.color for g in gamma.gens if g.arc == a) for a, c in res.arcs.items())


# -- Hamilton cycles -------------------------------------------------------------


def test_directed_cycle():
    arcs = {(i, (i + 1) % 7) for i in range(7)}
    res = hamilton_digraph(7, arcs)
    assert res.cycle == list(range(7)) and res.mode == "exact"
    res = hamilton_digraph(7, (arcs - {(6, 0)}) | {(6, 1), (2, 0)})
    assert res.cycle is None and res.proven


def test_complete_digraph():
    arcs = {(u, v) for u in range(5) for v in range(5) if u != v}
    res = hamilton_digraph(5, arcs)
    assert is_hamilton_cycle(5, arcs, res.cycle)


def test_two_triangles():
    arcs = {(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)}
    res = hamilton_digraph(6, arcs)
    assert res.cycle is None and res.proven


@settings(max_examples=200)
@given(st.integers(3, 8), st.floats(0.1, 0.7), st.integers(0, 10**6))
def test_dp_matches_brute_force(r, p, seed):
    rnd = np.random.default_rng(seed)
    arcs = {(u, v) for u in range(r) for v in range(r) if u != v and rnd.random() < p}
    res = hamilton_digraph(r, arcs)
    assert (res.cycle is not None) == brute_hamilton(r, arcs)
    if res.cycle is not None:
        assert is_hamilton_cycle(r, arcs, res.cycle)


def test_heuristic_on_large_sparse_digraph():
    found = 0
    for seed in range(10):
        arcs = random_gamma(100, 2, RandomSource(seed, "rg"))
        res = hamilton_digraph(100, arcs, RandomSource(seed, "h"))
        assert res.mode == "heuristic"
        if res.cycle is not None:
            assert is_hamilton_cycle(100, arcs, res.cycle)
            found += 1
    assert found >= 9


def test_heuristic_detects_source_vertex():
    arcs = {(i, (i + 1) % 30) for i in range(30)} - {(29, 0)}
    res = hamilton_digraph(30, arcs)
    assert res.cycle is None and res.proven


def test_random_gamma_degrees():
    arcs = random_gamma(20, 3, RandomSource(4))
    outd = np.bincount([u for u, _ in arcs], minlength=20)
    ind = np.bincount([v for _, v in arcs], minlength=20)
    assert outd.min() >= 3 and ind.min() >= 3
    assert all(u != v for u, v in arcs)
