import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rainbowham.core import RandomSource, edge_key
from rainbowham.errors import FormatError
from rainbowham.params import derive_parameters, explicit_parameters
from rainbowham.sampler import (
    merge_to_colored_graph,
    parse_lay,
    q2_value,
    sample_from_arcs,
    sample_layered,
    split_color_classes,
    write_lay,
)

# 4 vertices, classes C1 = 1..4, C2 = 5..8, C3 = 9..12
TINY = explicit_parameters(4, 0.1, 0.1, 0.1, 12)


def tiny(arcs, coins=None):
    return sample_from_arcs(TINY, arcs, coins)


def test_class_ranges():
    assert list(TINY.class_range(1)) == [1, 2, 3, 4]
    assert list(TINY.class_range(3)) == [9, 10, 11, 12]
    assert TINY.color_class(5) == 2


def test_single_arc_merge():
    g = merge_to_colored_graph(tiny({1: [(1, 2, 7)]}))
    assert g.m == 1 and g.color(1, 2) == 7


def test_d1_beats_d3():
    g = merge_to_colored_graph(tiny({1: [(2, 1, 3)], 3: [(1, 2, 10)]}))
    assert g.color(1, 2) == 3


def test_d1_both_arcs_follow_coin():
    for coin, want in ((True, 2), (False, 4)):
        s = tiny({1: [(1, 2, 2), (2, 1, 4)]}, {(1, 2): coin})
        assert merge_to_colored_graph(s).color(1, 2) == want
        G1 = s.G[0]
        assert G1.color(1, 2) == want


def test_d2_reverse_in_d2o_excludes_g2():
    s = tiny({2: [(1, 2, 5), (2, 1, 1)]})
    assert not s.G[1].has_edge(1, 2)


def test_d1_reverse_outside_c1_uses_coin():
    # (1,2) in D1 (color 3 in C1); (2,1) in D1o with color 6 outside C1
    s = tiny({1: [(1, 2, 3), (2, 1, 6)]}, {(1, 2): True})
    assert s.G[0].color(1, 2) == 3
    s = tiny({1: [(1, 2, 3), (2, 1, 6)]}, {(1, 2): False})
    assert not s.G[0].has_edge(1, 2)
    assert merge_to_colored_graph(s).color(1, 2) == 6


def test_g3_rules():
    assert tiny({3: [(1, 2, 9)]}).G[2].color(1, 2) == 9
    assert not tiny({3: [(1, 2, 9), (2, 1, 10)]}).G[2].has_edge(1, 2)
    assert not tiny({3: [(1, 2, 9)], 2: [(2, 1, 1)]}).G[2].has_edge(1, 2)
    # arc outside C3 never enters G3
    assert not tiny({3: [(1, 2, 1)]}).G[2].has_edge(1, 2)


def test_empty_layers():
    ps = explicit_parameters(20, 0.0, 0.0, 0.0, 30, allow_zero=True)
    s = sample_layered(ps, RandomSource(1))
    assert all(len(x) == 0 for x in split_color_classes(s)[:3])
    assert all(x.m == 0 for x in split_color_classes(s)[3:])
    assert merge_to_colored_graph(s).m == 0


def test_sampling_is_deterministic():
    ps = derive_parameters(300, 0.3, 0.3, 5)
    a = sample_layered(ps, RandomSource(11))
    b = sample_layered(ps, RandomSource(11))
    assert write_lay(a) == write_lay(b)
    assert a.coins == b.coins


def test_lay_round_trip():
    ps = explicit_parameters(60, 0.08, 0.1, 0.08, 90)
    s = sample_layered(ps, RandomSource(3))
    assert s.coins  # doubly covered D1o pairs exist at this density
    t = parse_lay(write_lay(s))
    assert write_lay(t) == write_lay(s)
    assert merge_to_colored_graph(t) == merge_to_colored_graph(s)
    assert t.G == s.G


def test_lay_rejects_bad_input():
    s = tiny({1: [(1, 2, 2)]})
    text = write_lay(s)
    with pytest.raises(FormatError):
        parse_lay(text.replace("1 2 2", "1 1 2"))
    with pytest.raises(FormatError):
        parse_lay(text.replace("coins 0", "coins 1\n1 2 1"))


def test_only_degrees_revealed_at_sampling():
    s = sample_layered(derive_parameters(200, 0.3, 0.3, 5), RandomSource(0))
    assert set(s.ledger.counts()) == {"outdeg"}
    assert s.ledger.counts()["outdeg"] == 3 * 200


def test_q2_formula():
    ps = derive_parameters(1000, 0.3, 0.3, 5)
    th = sum(ps.thetas)
    want = 2 * ps.p_2 * (1 - ps.p_2) * (1 + ps.theta_2) / (1 + th) * (1 - ps.p_1) ** 2
    assert q2_value(ps) == pytest.approx(want)


@st.composite
def small_samples(draw):
    n = draw(st.integers(3, 9))
    kappa = draw(st.integers(6, 15))
    ps = explicit_parameters(n, 0.1, 0.1, 0.1, kappa)
    pairs = [(u, v) for u in range(1, n + 1) for v in range(1, n + 1) if u != v]
    arcs = {}
    for i in (1, 2, 3):
        chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
        arcs[i] = [(u, v, draw(st.integers(1, kappa))) for u, v in chosen]
    d1 = {(u, v) for u, v, _ in arcs[1]}
    coins = {(u, v): draw(st.booleans()) for (u, v) in sorted(d1) if u < v and (v, u) in d1}
    return sample_from_arcs(ps, arcs, coins, enforce=False)


@given(small_samples())
def test_split_invariants(s):
    g = merge_to_colored_graph(s)
    seen = {}
    for i, G in enumerate(s.G, 1):
        rng = s.params.class_range(i)
        for u, v, c in G.edge_items():
            assert c in rng
            assert (u, v) not in seen, "G_i not edge-disjoint"
            seen[(u, v)] = i
            # G_i colors agree with the merged graph
            assert g.color(u, v) == c
    # merged graph is exactly the union of all arcs
    pairs = {edge_key(u, v) for i in (1, 2, 3) for (u, v) in s.D_full(i).arcs}
    assert {(u, v) for u, v, _ in g.edge_items()} == pairs


def test_d2o_arc_frequency():
    # arc frequency of D2o within 3 standard errors of p2
    n, reps = 50, 400
    ps = explicit_parameters(n, 0.02, 0.05, 0.02, 75)
    total = 0
    for t in range(reps):
        total += len(sample_layered(ps, RandomSource(t, "freq")).D_full(2).arcs)
    trials = reps * n * (n - 1)
    se = math.sqrt(ps.p_2 * (1 - ps.p_2) / trials)
    assert abs(total / trials - ps.p_2) <= 3 * se


def test_colors_uniform_on_full_range():
    ps = explicit_parameters(80, 0.05, 0.05, 0.05, 12)
    cols = np.concatenate([
        np.array(list(sample_layered(ps, RandomSource(t, "col")).D_full(1).arcs.values())) for t in range(20)
    ])
    counts = np.bincount(cols, minlength=13)[1:]
    assert counts.min() > 0.7 * counts.mean()
