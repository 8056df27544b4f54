import math

from hypothesis import assume, given, settings, strategies as st

from planted import planted_sample
from rainbowham.core import RandomSource
from rainbowham.cover import PathCover, cover_dangerous
from rainbowham.dangerous import DangerousSets, dangerous_sets
from rainbowham.long_path import build_long_path, check_long_path, red_fraction_diagnostic, stop_size, target_length
from rainbowham.params import explicit_parameters
from rainbowham.sampler import sample_from_arcs, sample_layered


def circulant_sample():
    # every vertex points to its next four around a 10-cycle; distance-5 pairs
    # carry D1 and D3 arcs so no vertex is dangerous
    n = 10
    ps = explicit_parameters(n, 0.01, 0.5, 0.01, 60, c1=10, c3=10)
    c2 = iter(ps.class_range(2))
    d2 = [(u, (u + k - 1) % n + 1, next(c2)) for u in range(1, n + 1) for k in range(1, 5)]
    d1 = [(u, (u + 4) % n + 1, 1) for u in range(1, n + 1)]
    d3 = [(u, (u + 4) % n + 1, 51) for u in range(1, n + 1)]
    return sample_from_arcs(ps, {1: d1, 2: d2, 3: d3})


def test_complete_rainbow_case_reaches_target():
    s = circulant_sample()
    ds = dangerous_sets(s)
    assert ds.S == set()
    res = build_long_path(s, ds, PathCover(), RandomSource(0))
    assert res.ok
    assert len(res.path) >= target_length(10)
    assert res.red_count == 0
    assert check_long_path(s, ds, PathCover(), res) == []


def test_stops_when_untouched_set_is_small():
    s = circulant_sample()
    ds = dangerous_sets(s)
    res = build_long_path(s, ds, PathCover(), RandomSource(0))
    assert len(res.untouched) < stop_size(10)


def test_red_when_exposed_half_leaves_U():
    # directed triangle 1 -> 2 -> 3 -> 1 plus an isolated vertex 4
    ps = explicit_parameters(6, 0.1, 0.1, 0.1, 18)
    c = ps.class_range(2)
    s = sample_from_arcs(ps, {2: [(1, 2, c[0]), (2, 3, c[1]), (3, 1, c[2])]}, enforce=False)
    ds = DangerousSets(set(), set(), set(), set(), {5, 6}, [], 4)
    res = build_long_path(s, ds, PathCover(), RandomSource(2), u_stop=0, require_target=False, keep_trace=True)
    kinds = [e[0] for e in res.trace]
    assert "red3" in kinds
    # the first red vertex closes the triangle walk: its only out-neighbour is used
    first = next(e for e in res.trace if e[0] == "red3")
    walk = [e for e in res.trace[: res.trace.index(first)] if e[0] == "extend"]
    if first[1] != 4:
        assert len(walk) == 2 and walk[-1][2] == first[1]
    assert res.red >= {first[1]}
    assert check_long_path(s, ds, PathCover(), res) == []


def test_red_fraction_diagnostic():
    assert red_fraction_diagnostic(0, 100)["within"]
    for n in (2, 10, 1000):
        assert not red_fraction_diagnostic(n, n)["within"]
    d = red_fraction_diagnostic(5, 10**4)
    assert math.isclose(d["bound"], 10**4 * math.exp(-(math.log(10**4) ** (1 / 3)) / 300))


def test_planted_walk_leaves_only_skipped_vertices():
    s, skipped = planted_sample(300, 0, skip=5)
    ds = dangerous_sets(s)
    cov = cover_dangerous(s.G[1], ds, RandomSource(0))
    res = build_long_path(s, ds, cov, RandomSource(0, "lp"), u_stop=6)
    assert res.ok
    assert check_long_path(s, ds, cov, res) == []
    led = s.ledger.counts()
    assert led["half"] >= 1 and led["probe"] >= 1


@settings(max_examples=20)
@given(st.integers(0, 10**6), st.integers(60, 160))
def test_walk_invariants_random(seed, n):
    q = 3 * math.log(n) / n
    ps = explicit_parameters(n, q, 2 * q, q, 3 * n, c1=n, c3=n)
    s = sample_layered(ps, RandomSource(seed))
    ds = dangerous_sets(s)
    cov = cover_dangerous(s.G[1], ds, RandomSource(seed, "c"))
    assume(isinstance(cov, PathCover))
    res = build_long_path(s, ds, cov, RandomSource(seed, "w"), u_stop=0, require_target=False)
    assert check_long_path(s, ds, cov, res) == []
    # everything touched is on the path or red
    assert res.untouched == set()
    assert res.steps <= 3 * n + 1
