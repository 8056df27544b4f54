import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rainbowham.core import (
    ColoredGraph,
    ExposureLedger,
    HamiltonCycleCertificate,
    RandomSource,
    derive_seed,
    parse_cgr,
    validate_colored_graph,
    verify_rainbow_hamilton,
    write_cgr,
)
from rainbowham.errors import ExposureError, FormatError, MalformedCertificateError


def cert(order, colors):
    return HamiltonCycleCertificate(tuple(order), tuple(colors))


def triangle(c12, c23, c13):
    return ColoredGraph.from_edges(3, 5, [(1, 2, c12), (2, 3, c23), (1, 3, c13)])


def test_triangle_rainbow_ok():
    g = triangle(1, 2, 3)
    assert verify_rainbow_hamilton(g, cert((1, 2, 3), (1, 2, 3))).ok


def test_triangle_repeated_color():
    g = triangle(1, 1, 2)
    rep = verify_rainbow_hamilton(g, cert((1, 2, 3), (1, 1, 2)))
    assert not rep.ok
    assert "repeated color 1" in rep.violations


def test_missing_edge_reported():
    g = ColoredGraph.from_edges(4, 4, [(1, 2, 1), (2, 3, 2), (3, 4, 3), (1, 4, 4)])
    rep = verify_rainbow_hamilton(g, cert((1, 3, 2, 4), (9, 2, 9, 4)))
    assert "missing edge (1,3)" in rep.violations


def test_length_mismatch_is_malformed():
    g = triangle(1, 2, 3)
    with pytest.raises(MalformedCertificateError):
        verify_rainbow_hamilton(g, cert((1, 2), (1, 2)))


def test_non_permutation():
    g = triangle(1, 2, 3)
    rep = verify_rainbow_hamilton(g, cert((1, 2, 2), (1, 2, 3)))
    assert "order is not a permutation of 1..n" in rep.violations


def test_wrong_color_in_certificate():
    g = triangle(1, 2, 3)
    rep = verify_rainbow_hamilton(g, cert((1, 2, 3), (1, 2, 4)))
    assert not rep.ok and any("color mismatch" in v for v in rep.violations)


def test_validate_examples():
    assert validate_colored_graph(ColoredGraph(5, 5, ())) == []
    assert any("self-loop" in v for v in validate_colored_graph(ColoredGraph(5, 5, ((2, 2, 1),))))
    assert any("color out of range" in v for v in validate_colored_graph(ColoredGraph(5, 5, ((1, 2, 7),))))
    assert any("duplicate" in v for v in validate_colored_graph(ColoredGraph(5, 5, ((1, 2, 1), (2, 1, 3)))))
    assert any("vertex out of range" in v for v in validate_colored_graph(ColoredGraph(5, 5, ((1, 6, 1),))))


@st.composite
def rainbow_cycles(draw):
    n = draw(st.integers(3, 12))
    perm = draw(st.permutations(range(1, n + 1)))
    kappa = n + draw(st.integers(0, 5))
    cols = draw(st.permutations(range(1, kappa + 1)))[:n]
    edges = [(perm[i], perm[(i + 1) % n], cols[i]) for i in range(n)]
    return ColoredGraph.from_edges(n, kappa, edges), list(perm), list(cols)


@given(rainbow_cycles(), st.integers(0, 11), st.booleans())
def test_verifier_rotation_and_reversal_invariant(data, shift, rev):
    g, order, cols = data
    n = len(order)
    assert verify_rainbow_hamilton(g, cert(order, cols)).ok
    k = shift % n
    order2, cols2 = order[k:] + order[:k], cols[k:] + cols[:k]
    if rev:
        order2 = order2[::-1]
        cols2 = [g.color(order2[i], order2[(i + 1) % n]) for i in range(n)]
    rep = verify_rainbow_hamilton(g, cert(order2, cols2))
    assert rep.ok
    assert len(set(cols2)) == n


def test_cgr_round_trip_and_errors():
    g = ColoredGraph.from_edges(4, 6, [(1, 2, 3), (2, 4, 6), (1, 3, 1)])
    assert parse_cgr(write_cgr(g)) == g
    with pytest.raises(FormatError) as e:
        parse_cgr("4 6 2\n1 2 3\n1 2 4\n")
    assert e.value.line == 3
    with pytest.raises(FormatError) as e:
        parse_cgr("4 6 1\n2 1 3\n")
    assert e.value.line == 2
    with pytest.raises(FormatError):
        parse_cgr("4 6 1\n1 2 7\n")
    with pytest.raises(FormatError):
        parse_cgr("4 6 2\n1 2 3\n")


@given(st.integers(0, 2**64 - 1), st.text(min_size=1, max_size=8))
def test_random_source_replay(seed, stream):
    a = RandomSource(seed, stream).generator.integers(0, 2**32, size=8)
    b = RandomSource(seed, stream).generator.integers(0, 2**32, size=8)
    assert np.array_equal(a, b)


def test_streams_differ():
    a = RandomSource(7, "x").generator.random(4)
    b = RandomSource(7, "y").generator.random(4)
    assert not np.array_equal(a, b)
    assert RandomSource(7).child("x").stream == "root/x"


def test_derive_seed_stable():
    assert derive_seed(1, "a", (2, 3)) == derive_seed(1, "a", (2, 3))
    assert derive_seed(1, "a") != derive_seed(1, "b")
    assert 0 <= derive_seed("x") < 2**64


def test_ledger_rules():
    led = ExposureLedger()
    led.reveal(("outdeg", 1, 3), 5)
    assert led.read(("outdeg", 1, 3)) == 5
    with pytest.raises(ExposureError):
        led.reveal(("outdeg", 1, 3), 5)
    with pytest.raises(ExposureError):
        led.read(("outdeg", 2, 3))
    with pytest.raises(ExposureError):
        led.forbid(("outdeg", 1, 3))
    calls = []
    assert led.probe(("probe", 1, 2), lambda: calls.append(1) or True) is True
    assert led.probe(("probe", 1, 2), lambda: calls.append(1) or False) is True
    assert len(calls) == 1
    mark = led.checkpoint()
    led.reveal(("x",), 1)
    led.rollback(mark)
    assert not led.is_revealed(("x",))
    assert led.counts() == {"outdeg": 1, "probe": 1}


def test_ledger_off_allows_everything():
    led = ExposureLedger(enforce=False)
    led.reveal(("a",), 1)
    led.reveal(("a",), 2)
    assert led.read(("b",)) is None


def test_certificate_from_order():
    g = ColoredGraph.from_edges(4, 4, [(1, 2, 1), (2, 3, 2), (3, 4, 3), (1, 4, 4)])
    c = HamiltonCycleCertificate.from_order(g, (1, 2, 3, 4))
    assert c.colors == (1, 2, 3, 4)
    assert verify_rainbow_hamilton(g, c).ok


def test_all_k4_orders_checked():
    g = ColoredGraph.from_edges(4, 6, [(a, b, i + 1) for i, (a, b) in enumerate(itertools.combinations(range(1, 5), 2))])
    for perm in itertools.permutations(range(1, 5)):
        assert verify_rainbow_hamilton(g, HamiltonCycleCertificate.from_order(g, perm)).ok
