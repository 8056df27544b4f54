"""Exact small-instance searches and the colored-graph / 3-graph reduction.

Hypergraph vertices ``1..n`` are graph vertices and ``n+1..n+kappa`` are
color vertices, so an edge ``(u, v, c)`` becomes the triple ``{u, v, n+c}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .core import ColoredGraph, HamiltonCycleCertificate, edge_key
from .errors import FormatError, ParityError

FOUND, ABSENT, EXHAUSTED = "found", "proven-absent", "budget-exhausted"


@dataclass
class OracleResult:
    status: str
    certificate: Optional[HamiltonCycleCertificate] = None
    nodes: int = 0

    @property
    def found(self) -> bool:
        return self.status == FOUND

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "certificate": self.certificate.to_json() if self.certificate else None,
            "nodes": self.nodes,
        }


class _Budget(Exception):
    pass


def exact_rainbow_hamilton(g: ColoredGraph, budget: Optional[int] = None) -> OracleResult:
    """Backtracking over cycles through vertex 1 with color and degree pruning.

    ``budget`` bounds the number of search nodes; ``None`` means unlimited.
    """
    n = g.n
    if n < 3 or g.m < n:
        return OracleResult(ABSENT)
    if any(g.degree(v) < 2 for v in g.vertices()):
        return OracleResult(ABSENT)
    order = [1]
    on = [False] * (n + 1)
    on[1] = True
    used: set[int] = set()
    cols: list[int] = []
    count = 0

    def stuck() -> bool:
        # an unvisited vertex needs two usable neighbours among unvisited or ends
        end = order[-1]
        for x in g.vertices():
            if on[x]:
                continue
            k = 0
            for y in g.neighbors(x):
                if (not on[y] or y == end or y == 1) and g.color(x, y) not in used:
                    k += 1
                    if k >= 2:
                        break
            if k < 2:
                return True
        return False

    def rec() -> bool:
        nonlocal count
        count += 1
        if budget is not None and count > budget:
            raise _Budget
        v = order[-1]
        if len(order) == n:
            c = g.color(v, 1)
            if c is not None and c not in used:
                cols.append(c)
                return True
            return False
        if stuck():
            return False
        for w in g.neighbors(v):
            if on[w]:
                continue
            # orientation: the second vertex is smaller than the last one
            if len(order) == n - 1 and n > 2 and order[1] > w:
                continue
            c = g.color(v, w)
            if c in used:
                continue
            on[w] = True
            order.append(w)
            used.add(c)
            cols.append(c)
            if rec():
                return True
            cols.pop()
            used.discard(c)
            order.pop()
            on[w] = False
        return False

    try:
        ok = rec()
    except _Budget:
        return OracleResult(EXHAUSTED, nodes=count)
    if ok:
        return OracleResult(FOUND, HamiltonCycleCertificate(tuple(order), tuple(cols)), count)
    return OracleResult(ABSENT, nodes=count)


# -- hypergraphs ---------------------------------------------------------------


@dataclass(frozen=True)
class Hypergraph3:
    N: int
    edges: frozenset = field(default_factory=frozenset)

    @classmethod
    def from_triples(cls, N: int, triples: Iterable[Iterable[int]]) -> Hypergraph3:
        out = set()
        for t in triples:
            t = tuple(sorted(t))
            if len(t) != 3 or len(set(t)) != 3:
                raise ValueError(f"triple {t} must have 3 distinct vertices")
            if t[0] < 1 or t[2] > N:
                raise ValueError(f"triple {t} out of range 1..{N}")
            if t in out:
                raise ValueError(f"duplicate triple {t}")
            out.add(t)
        return cls(N, frozenset(out))

    def __contains__(self, t) -> bool:
        return tuple(sorted(t)) in self.edges

    @property
    def m(self) -> int:
        return len(self.edges)


@dataclass
class NotRepresentable:
    triple: tuple[int, int, int]
    reason: str


def graph_to_hypergraph(g: ColoredGraph) -> Hypergraph3:
    return Hypergraph3(g.n + g.kappa, frozenset(tuple(sorted((u, v, g.n + c))) for u, v, c in g.edge_items()))


def hypergraph_to_graph(h: Hypergraph3, n: int, kappa: int):
    """Inverse of graph_to_hypergraph, or NotRepresentable."""
    if h.N != n + kappa:
        raise ValueError(f"N={h.N} does not split as {n}+{kappa}")
    seen: dict[tuple[int, int], tuple] = {}
    edges = []
    for t in sorted(h.edges):
        low = [x for x in t if x <= n]
        high = [x for x in t if x > n]
        if len(low) != 2 or len(high) != 1:
            return NotRepresentable(t, "needs two graph vertices and one color vertex")
        key = edge_key(*low)
        if key in seen:
            return NotRepresentable(t, f"pair {key} repeats")
        seen[key] = t
        edges.append((key[0], key[1], high[0] - n))
    return ColoredGraph.from_edges(n, kappa, edges)


@dataclass
class LooseCheck:
    ok: bool
    violations: list[str]

    def __bool__(self) -> bool:
        return self.ok


def loose_triples(perm: list[int]) -> list[tuple[int, int, int]]:
    N = len(perm)
    return [(perm[2 * i], perm[2 * i + 1], perm[(2 * i + 2) % N]) for i in range(N // 2)]


def loose_hamilton_check(h: Hypergraph3, perm: list[int]) -> LooseCheck:
    if h.N % 2:
        raise ParityError(f"loose Hamilton cycles need an even vertex count, got {h.N}")
    if sorted(perm) != list(range(1, h.N + 1)):
        return LooseCheck(False, ["not a permutation of the vertices"])
    bad = [f"triple {i + 1} {t} missing" for i, t in enumerate(loose_triples(perm)) if t not in h]
    return LooseCheck(not bad, bad)


@dataclass
class LooseResult:
    status: str
    perm: Optional[list[int]] = None
    nodes: int = 0


def exact_loose_hamilton(h: Hypergraph3, budget: Optional[int] = None) -> LooseResult:
    """Backtracking for a loose Hamilton cycle.

    Some shared vertex (odd position) either is vertex 1 or precedes it, so
    the search starts from those two cases.
    """
    N = h.N
    if N % 2:
        raise ParityError(f"loose Hamilton cycles need an even vertex count, got {N}")
    if N < 4:
        return LooseResult(ABSENT)
    inc: dict[int, list[tuple[int, int, int]]] = {v: [] for v in range(1, N + 1)}
    for t in sorted(h.edges):
        for x in t:
            inc[x].append(t)
    on = [False] * (N + 1)
    perm: list[int] = []
    count = 0

    def rec() -> bool:
        nonlocal count
        count += 1
        if budget is not None and count > budget:
            raise _Budget
        if len(perm) == N - 1:
            # last middle vertex closes onto perm[0]
            a, z = perm[-1], perm[0]
            for t in inc[a]:
                if z in t:
                    (m,) = [x for x in t if x != a and x != z]
                    if not on[m]:
                        perm.append(m)
                        return True
            return False
        a = perm[-1]
        for t in inc[a]:
            rest = [x for x in t if x != a]
            if any(on[x] for x in rest):
                continue
            for m, b in (rest, rest[::-1]):
                if b == perm[0]:
                    continue
                on[m] = on[b] = True
                perm.extend((m, b))
                if rec():
                    return True
                perm.pop()
                perm.pop()
                on[m] = on[b] = False
        return False

    starts: list[tuple[int, ...]] = [(1,)]
    for t in inc[1]:
        a, b = [x for x in t if x != 1]
        starts += [(a, 1, b), (b, 1, a)]
    try:
        for st in starts:
            perm[:] = list(st)
            for x in range(N + 1):
                on[x] = False
            for x in st:
                on[x] = True
            if rec():
                return LooseResult(FOUND, list(perm), count)
    except _Budget:
        return LooseResult(EXHAUSTED, nodes=count)
    return LooseResult(ABSENT, nodes=count)


def is_alternating(perm: list[int], n: int) -> bool:
    """Odd positions hold graph vertices and even positions color vertices."""
    return all((x <= n) == (i % 2 == 0) for i, x in enumerate(perm))


def project_loose_cycle(perm: list[int], n: int) -> HamiltonCycleCertificate:
    """Read a rainbow Hamilton cycle off an alternating loose cycle."""
    if not is_alternating(perm, n):
        raise ValueError("loose cycle is not in alternating form")
    return HamiltonCycleCertificate(tuple(perm[0::2]), tuple(c - n for c in perm[1::2]))


def lift_certificate(cert: HamiltonCycleCertificate, n: int) -> list[int]:
    """Inverse of project_loose_cycle."""
    out = []
    for v, c in zip(cert.order, cert.colors):
        out += [v, n + c]
    return out


# -- .h3 files -----------------------------------------------------------------


def write_h3(h: Hypergraph3) -> str:
    lines = [f"{h.N} {h.m}"] + [f"{a} {b} {c}" for a, b, c in sorted(h.edges)]
    return "\n".join(lines) + "\n"


def parse_h3(text: str) -> Hypergraph3:
    rows = [(i + 1, ln.split()) for i, ln in enumerate(text.splitlines()) if ln.strip()]
    if not rows:
        raise FormatError("empty file")
    ln, head = rows[0]
    try:
        N, m = (int(x) for x in head)
    except ValueError:
        raise FormatError("header must be 'N m'", ln) from None
    if len(rows) - 1 != m:
        raise FormatError(f"header announces {m} triples, found {len(rows) - 1}", ln)
    triples = []
    for ln, parts in rows[1:]:
        try:
            t = tuple(int(x) for x in parts)
        except ValueError:
            raise FormatError("non-integer field", ln) from None
        if len(t) != 3:
            raise FormatError("expected three vertices", ln)
        triples.append(t)
    try:
        return Hypergraph3.from_triples(N, triples)
    except ValueError as e:
        raise FormatError(str(e)) from None


def read_h3(path: str | Path) -> Hypergraph3:
    return parse_h3(Path(path).read_text())
