"""Layered digraph model and its color-class split.

Three independent colored digraphs ``D1o, D2o, D3o`` (arc probability
``p_i``, arc colors uniform on ``1..kappa``) are merged into one colored
graph with priority ``D1o > D2o > D3o``.  ``D_i`` keeps the arcs of ``D_io``
whose color lies in class ``C_i``, and ``G1, G2, G3`` are the edge-disjoint
undirected graphs built from them.

The whole sample is drawn up front.  Later stages only learn about it through
an :class:`~rainbowham.core.ExposureLedger`, which makes the order of
exposure checkable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import ColoredDigraph, ColoredGraph, ExposureLedger, RandomSource, edge_key
from .errors import FormatError
from .params import ParamSet, explicit_parameters


@dataclass
class Layer:
    """One colored digraph with out-lists in their fixed random order."""

    arcs: dict[tuple[int, int], int]
    out: list[list[int]]

    @classmethod
    def empty(cls, n: int) -> Layer:
        return cls({}, [[] for _ in range(n + 1)])

    @classmethod
    def from_arc_list(cls, n: int, arc_list) -> Layer:
        layer = cls.empty(n)
        for u, v, c in arc_list:
            layer.arcs[(u, v)] = c
            layer.out[u].append(v)
        return layer

    def outdeg(self, v: int) -> int:
        return len(self.out[v])

    def restrict(self, n: int, colors: range) -> Layer:
        lo, hi = colors.start, colors.stop
        sub = Layer.empty(n)
        for u in range(1, n + 1):
            for v in self.out[u]:
                c = self.arcs[(u, v)]
                if lo <= c < hi:
                    sub.arcs[(u, v)] = c
                    sub.out[u].append(v)
        return sub

    def arc_list(self) -> list[tuple[int, int, int]]:
        return [(u, v, self.arcs[(u, v)]) for u in range(1, len(self.out)) for v in self.out[u]]


@dataclass
class LayeredSample:
    params: ParamSet
    full: tuple[Layer, Layer, Layer]
    coins: dict[tuple[int, int], bool]
    ledger: ExposureLedger = field(default_factory=ExposureLedger)
    classes: tuple[Layer, Layer, Layer] = None  # type: ignore[assignment]
    G: tuple[ColoredGraph, ColoredGraph, ColoredGraph] = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.classes is None:
            n = self.params.n
            self.classes = tuple(self.full[i].restrict(n, self.params.class_range(i + 1)) for i in range(3))
        if self.G is None:
            self.G = _build_G(self)

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def kappa(self) -> int:
        return self.params.kappa

    def D_full(self, i: int) -> Layer:
        return self.full[i - 1]

    def D(self, i: int) -> Layer:
        return self.classes[i - 1]

    def digraph(self, i: int, restricted: bool = True) -> ColoredDigraph:
        layer = self.D(i) if restricted else self.D_full(i)
        return ColoredDigraph(self.n, self.kappa, dict(layer.arcs))

    @property
    def q2(self) -> float:
        return q2_value(self.params)

    def coin_choice(self, u: int, v: int) -> tuple[int, int]:
        """Arc whose color the pair ``{u, v}`` takes when both arcs lie in D1o."""
        a, b = edge_key(u, v)
        return (a, b) if self.coins[(a, b)] else (b, a)

    def reveal_outdegrees(self) -> None:
        for i in (1, 2, 3):
            layer = self.D(i)
            for v in range(1, self.n + 1):
                self.ledger.reveal(("outdeg", i, v), layer.outdeg(v))


def q2_value(ps: ParamSet) -> float:
    th = ps.theta_1 + ps.theta_2 + ps.theta_3
    return 2 * ps.p_2 * (1 - ps.p_2) * (1 + ps.theta_2) / (1 + th) * (1 - ps.p_1) ** 2


def _sample_layer(n: int, p: float, kappa: int, gen: np.random.Generator) -> Layer:
    total = n * (n - 1)
    if p <= 0.0:
        return Layer.empty(n)
    m = int(gen.binomial(total, p))
    idx = gen.choice(total, size=m, replace=False)
    cols = gen.integers(1, kappa + 1, size=m)
    u0 = idx // (n - 1)
    r = idx % (n - 1)
    v0 = r + (r >= u0)
    return Layer.from_arc_list(n, zip((u0 + 1).tolist(), (v0 + 1).tolist(), cols.tolist()))


def _draw_coins(d1o: Layer, gen: np.random.Generator) -> dict[tuple[int, int], bool]:
    pairs = sorted((u, v) for (u, v) in d1o.arcs if u < v and (v, u) in d1o.arcs)
    flips = gen.random(len(pairs)) < 0.5
    return {pr: bool(f) for pr, f in zip(pairs, flips.tolist())}


def sample_layered(params: ParamSet, rng: RandomSource, enforce: bool = True) -> LayeredSample:
    n, kappa = params.n, params.kappa
    layers = tuple(
        _sample_layer(n, params.probs[i], kappa, rng.child(f"layer{i + 1}").generator) for i in range(3)
    )
    coins = _draw_coins(layers[0], rng.child("coins").generator)
    s = LayeredSample(params, layers, coins, ExposureLedger(enforce))
    s.reveal_outdegrees()
    return s


def merge_to_colored_graph(s: LayeredSample) -> ColoredGraph:
    colors: dict[tuple[int, int], int] = {}
    for i in (1, 2, 3):
        arcs = s.D_full(i).arcs
        for (u, v), c in arcs.items():
            key = edge_key(u, v)
            if key in colors:
                continue
            rev = (v, u)
            if rev in arcs:
                if i == 1:
                    c = arcs[s.coin_choice(u, v)]
                else:
                    c = arcs[key]
            colors[key] = c
    return ColoredGraph(s.n, s.kappa, tuple((u, v, c) for (u, v), c in sorted(colors.items())))


def _build_G(s: LayeredSample) -> tuple[ColoredGraph, ColoredGraph, ColoredGraph]:
    d1o, d2o, d3o = (s.D_full(i).arcs for i in (1, 2, 3))
    d1, d2, d3 = (s.D(i).arcs for i in (1, 2, 3))
    g1: dict[tuple[int, int], int] = {}
    for (u, v), c in d1.items():
        if (v, u) not in d1o:
            g1[edge_key(u, v)] = c
        elif s.coin_choice(u, v) == (u, v):
            # both arcs in D1o and the coin picks (u, v); covers both the
            # both-in-D1 case and the reverse-outside-C1 case
            g1[edge_key(u, v)] = c
    g2 = {}
    for (u, v), c in d2.items():
        if (u, v) not in d1o and (v, u) not in d1o and (v, u) not in d2o:
            g2[edge_key(u, v)] = c
    g3 = {}
    for (u, v), c in d3.items():
        if (u, v) in d1o or (u, v) in d2o:
            continue
        if (v, u) in d1o or (v, u) in d2o or (v, u) in d3o:
            continue
        g3[edge_key(u, v)] = c
    n, k = s.n, s.kappa
    return tuple(ColoredGraph(n, k, tuple((a, b, c) for (a, b), c in sorted(g.items()))) for g in (g1, g2, g3))


def split_color_classes(s: LayeredSample):
    """Return ``(D1, D2, D3, G1, G2, G3)``."""
    return (s.digraph(1), s.digraph(2), s.digraph(3), *s.G)


# -- .lay text format ----------------------------------------------------------


def write_lay(s: LayeredSample) -> str:
    ps = s.params
    out = [f"LAY {ps.n} {ps.kappa} {ps.c_1} {ps.c_2} {ps.c_3}", f"probs {ps.p_1!r} {ps.p_2!r} {ps.p_3!r}"]
    for i in (1, 2, 3):
        arcs = s.D_full(i).arc_list()
        out.append(f"layer {i} {len(arcs)}")
        out += [f"{u} {v} {c}" for u, v, c in arcs]
    out.append(f"coins {len(s.coins)}")
    out += [f"{u} {v} {int(b)}" for (u, v), b in sorted(s.coins.items())]
    return "\n".join(out) + "\n"


def parse_lay(text: str, params: Optional[ParamSet] = None, enforce: bool = True) -> LayeredSample:
    lines = text.splitlines()
    pos = 0

    def take(prefix: str, count: int) -> list[str]:
        nonlocal pos
        if pos >= len(lines):
            raise FormatError(f"expected '{prefix}' line, found end of file", pos + 1)
        parts = lines[pos].split()
        if not parts or parts[0] != prefix or len(parts) != count + 1:
            raise FormatError(f"expected '{prefix}' with {count} fields", pos + 1)
        pos += 1
        return parts[1:]

    try:
        n, kappa, c1, c2, c3 = map(int, take("LAY", 5))
        p1, p2, p3 = map(float, take("probs", 3))
    except ValueError:
        raise FormatError("bad header value", pos) from None
    if params is None:
        params = explicit_parameters(n, p1, p2, p3, kappa, c1=c1, c3=c3, allow_zero=True)
    elif (params.n, params.kappa, params.class_sizes) != (n, kappa, (c1, c2, c3)):
        raise FormatError("header does not match the supplied parameters", 1)

    def records(k: int, check) -> list[tuple[int, int, int]]:
        nonlocal pos
        rows = []
        for _ in range(k):
            if pos >= len(lines):
                raise FormatError("unexpected end of file", pos + 1)
            parts = lines[pos].split()
            if len(parts) != 3:
                raise FormatError("expected 3 integers", pos + 1)
            try:
                row = tuple(int(x) for x in parts)
            except ValueError:
                raise FormatError("non-integer field", pos + 1) from None
            check(row, pos + 1)
            rows.append(row)
            pos += 1
        return rows

    layers = []
    for i in (1, 2, 3):
        tag, m = take("layer", 2)
        if int(tag) != i:
            raise FormatError(f"expected layer {i}", pos)
        seen: set[tuple[int, int]] = set()

        def check_arc(row, ln, seen=seen):
            u, v, c = row
            if not (1 <= u <= n and 1 <= v <= n) or u == v:
                raise FormatError(f"bad arc ({u},{v})", ln)
            if not 1 <= c <= kappa:
                raise FormatError(f"color {c} outside 1..{kappa}", ln)
            if (u, v) in seen:
                raise FormatError(f"duplicate arc ({u},{v})", ln)
            seen.add((u, v))

        layers.append(Layer.from_arc_list(n, records(int(m), check_arc)))
    (k,) = take("coins", 1)

    def check_coin(row, ln):
        u, v, b = row
        if not 1 <= u < v <= n or b not in (0, 1):
            raise FormatError("bad coin record", ln)
        if (u, v) not in layers[0].arcs or (v, u) not in layers[0].arcs:
            raise FormatError(f"coin for pair ({u},{v}) which is not doubly covered", ln)

    coins = {(u, v): bool(b) for u, v, b in records(int(k), check_coin)}
    expected = {(u, v) for (u, v) in layers[0].arcs if u < v and (v, u) in layers[0].arcs}
    if set(coins) != expected:
        raise FormatError("coin log does not match the doubly covered pairs", pos)
    s = LayeredSample(params, tuple(layers), coins, ExposureLedger(enforce))
    s.reveal_outdegrees()
    return s


def read_lay(path: str | Path, params: Optional[ParamSet] = None) -> LayeredSample:
    return parse_lay(Path(path).read_text(), params)


def sample_from_arcs(params: ParamSet, arcs: dict[int, list[tuple[int, int, int]]],
                     coins: Optional[dict[tuple[int, int], bool]] = None, enforce: bool = True) -> LayeredSample:
    """Build a sample from hand-listed arcs ``{layer: [(u, v, c), ...]}``.

    Missing coins for doubly covered D1o pairs default to ``True`` (the arc
    from the smaller id wins).
    """
    n = params.n
    layers = tuple(Layer.from_arc_list(n, arcs.get(i, [])) for i in (1, 2, 3))
    coins = dict(coins or {})
    for (u, v) in layers[0].arcs:
        if u < v and (v, u) in layers[0].arcs:
            coins.setdefault((u, v), True)
    s = LayeredSample(params, layers, coins, ExposureLedger(enforce))
    s.reveal_outdegrees()
    return s

