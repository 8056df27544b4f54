"""Colored graphs, the rainbow Hamilton cycle verifier, seeded random streams
and the exposure ledger.

Vertices are the integers ``1..n`` and colors the integers ``1..kappa``.
"""

from __future__ import annotations

import hashlib
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import ExposureError, FormatError, MalformedCertificateError


def edge_key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class ColoredGraph:
    """Undirected simple graph with one color per edge.

    ``edges`` keeps the triples exactly as supplied so that
    :func:`validate_colored_graph` can report problems; algorithms use the
    normalized index built on first access.
    """

    n: int
    kappa: int
    edges: tuple[tuple[int, int, int], ...] = ()

    @classmethod
    def from_edges(cls, n: int, kappa: int, edges: Iterable[tuple[int, int, int]]) -> ColoredGraph:
        return cls(n, kappa, tuple((int(u), int(v), int(c)) for u, v, c in edges))

    @cached_property
    def _color(self) -> dict[tuple[int, int], int]:
        return {edge_key(u, v): c for u, v, c in self.edges}

    @cached_property
    def _adj(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n + 1)]
        for u, v in sorted(self._color):
            if 1 <= u <= self.n and 1 <= v <= self.n and u != v:
                adj[u].append(v)
                adj[v].append(u)
        return adj

    @property
    def m(self) -> int:
        return len(self._color)

    def has_edge(self, u: int, v: int) -> bool:
        return edge_key(u, v) in self._color

    def color(self, u: int, v: int) -> int | None:
        return self._color.get(edge_key(u, v))

    def neighbors(self, v: int) -> list[int]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def max_degree(self) -> int:
        return max((len(a) for a in self._adj[1:]), default=0)

    def vertices(self) -> range:
        return range(1, self.n + 1)

    def edge_items(self) -> Iterator[tuple[int, int, int]]:
        """Normalized ``(u, v, c)`` triples with ``u < v`` in sorted order."""
        for (u, v), c in sorted(self._color.items()):
            yield u, v, c

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ColoredGraph):
            return NotImplemented
        return (self.n, self.kappa, self._color) == (other.n, other.kappa, other._color)

    def __hash__(self) -> int:
        return hash((self.n, self.kappa, tuple(sorted(self._color.items()))))


@dataclass(frozen=True)
class ColoredDigraph:
    """Directed graph without loops; ``(u, v)`` and ``(v, u)`` may coexist."""

    n: int
    kappa: int
    arcs: dict[tuple[int, int], int] = field(default_factory=dict)

    def has_arc(self, u: int, v: int) -> bool:
        return (u, v) in self.arcs

    def color(self, u: int, v: int) -> int | None:
        return self.arcs.get((u, v))

    def __len__(self) -> int:
        return len(self.arcs)


@dataclass(frozen=True)
class HamiltonCycleCertificate:
    order: tuple[int, ...]
    colors: tuple[int, ...]

    def to_json(self) -> dict:
        return {"order": list(self.order), "colors": list(self.colors)}

    @classmethod
    def from_json(cls, d: dict) -> HamiltonCycleCertificate:
        return cls(tuple(d["order"]), tuple(d["colors"]))

    @classmethod
    def from_order(cls, g: ColoredGraph, order: Iterable[int]) -> HamiltonCycleCertificate:
        order = tuple(order)
        k = len(order)
        colors = tuple(g.color(order[i], order[(i + 1) % k]) or 0 for i in range(k))
        return cls(order, colors)


@dataclass
class VerificationReport:
    ok: bool
    violations: list[str]

    def __bool__(self) -> bool:
        return self.ok


def verify_rainbow_hamilton(g: ColoredGraph, cert: HamiltonCycleCertificate) -> VerificationReport:
    """Check that ``cert`` is a rainbow Hamilton cycle of ``g``.

    Raises MalformedCertificateError when the order or color list does not
    have length n; every other defect is reported as a violation.
    """
    n = g.n
    if len(cert.order) != n:
        raise MalformedCertificateError(f"order has length {len(cert.order)}, expected {n}")
    if len(cert.colors) != n:
        raise MalformedCertificateError(f"colors has length {len(cert.colors)}, expected {n}")
    violations: list[str] = []
    if sorted(cert.order) != list(range(1, n + 1)):
        violations.append("order is not a permutation of 1..n")
    for i in range(n):
        u, v = cert.order[i], cert.order[(i + 1) % n]
        c = g.color(u, v)
        if c is None:
            violations.append(f"missing edge ({u},{v})")
        elif c != cert.colors[i]:
            violations.append(f"color mismatch on ({u},{v}): graph has {c}, certificate says {cert.colors[i]}")
    for c, k in sorted(Counter(cert.colors).items()):
        if k > 1:
            violations.append(f"repeated color {c}")
    return VerificationReport(not violations, violations)


def validate_colored_graph(g: ColoredGraph) -> list[str]:
    """Return the list of invariant violations of ``g`` (empty means valid)."""
    out: list[str] = []
    seen: set[tuple[int, int]] = set()
    for u, v, c in g.edges:
        if u == v:
            out.append(f"self-loop at {u}")
        if not (1 <= u <= g.n and 1 <= v <= g.n):
            out.append(f"vertex out of range in edge ({u},{v})")
        if not 1 <= c <= g.kappa:
            out.append(f"color out of range: {c} on ({u},{v})")
        key = edge_key(u, v)
        if key in seen:
            out.append(f"duplicate edge ({key[0]},{key[1]})")
        seen.add(key)
    return out


# -- .cgr text format --------------------------------------------------------


def write_cgr(g: ColoredGraph) -> str:
    lines = [f"{g.n} {g.kappa} {g.m}"]
    lines += [f"{u} {v} {c}" for u, v, c in g.edge_items()]
    return "\n".join(lines) + "\n"


def _int_fields(line: str, k: int, lineno: int) -> list[int]:
    parts = line.split()
    if len(parts) != k:
        raise FormatError(f"expected {k} integers, got {len(parts)}", lineno)
    try:
        return [int(x) for x in parts]
    except ValueError:
        raise FormatError("non-integer field", lineno) from None


def parse_cgr(text: str) -> ColoredGraph:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty file", 1)
    n, kappa, m = _int_fields(lines[0], 3, 1)
    if n < 1 or kappa < 1 or m < 0:
        raise FormatError("header values out of range", 1)
    body = lines[1:]
    if len(body) < m:
        raise FormatError(f"expected {m} edge lines, found {len(body)}", len(lines))
    if any(s.strip() for s in body[m:]):
        raise FormatError("trailing content after edge list", m + 2)
    edges = []
    seen: set[tuple[int, int]] = set()
    for i, line in enumerate(body[:m], start=2):
        u, v, c = _int_fields(line, 3, i)
        if not 1 <= u < v <= n:
            raise FormatError(f"need 1 <= u < v <= {n}, got u={u} v={v}", i)
        if not 1 <= c <= kappa:
            raise FormatError(f"color {c} outside 1..{kappa}", i)
        if (u, v) in seen:
            raise FormatError(f"duplicate edge ({u},{v})", i)
        seen.add((u, v))
        edges.append((u, v, c))
    return ColoredGraph(n, kappa, tuple(edges))


def read_cgr(path: str | Path) -> ColoredGraph:
    return parse_cgr(Path(path).read_text())


# -- randomness --------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def _stream_words(stream: str) -> tuple[int, ...]:
    digest = hashlib.sha256(stream.encode("utf-8")).digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


class RandomSource:
    """Deterministic random stream identified by ``(seed, stream)``.

    Streams with different labels are seeded through independent
    ``SeedSequence`` spawn keys, so substreams can be handed to separate
    stages or workers without coupling their draw order.
    """

    def __init__(self, seed: int, stream: str = "root"):
        self.seed = int(seed) & _MASK64
        self.stream = stream
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=_stream_words(stream))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, name: str) -> RandomSource:
        return RandomSource(self.seed, f"{self.stream}/{name}")

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, stream={self.stream!r})"


def derive_seed(*parts: object) -> int:
    """Stable 64-bit seed from arbitrary printable parts."""
    text = "\x1f".join(repr(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")


# -- exposure ledger -----------------------------------------------------------


class ExposureLedger:
    """Records which random quantities a pipeline run has revealed.

    Keys are tuples whose first element names the kind of quantity, e.g.
    ``("outdeg", layer, v)`` or ``("probe", layer, u, v)``.  Revealing a key
    twice or reading an unrevealed key raises ExposureError while
    ``enforce`` is on; with it off the ledger only keeps values and the log.
    """

    def __init__(self, enforce: bool = True):
        self.enforce = enforce
        self._values: dict[tuple, object] = {}
        self.log: list[tuple] = []

    def reveal(self, key: tuple, value: object = None) -> object:
        if key in self._values and self.enforce:
            raise ExposureError(f"{key!r} revealed twice")
        self._values[key] = value
        self.log.append(key)
        return value

    def probe(self, key: tuple, compute) -> object:
        """Reveal ``key`` on first use; later calls return the cached value."""
        if key in self._values:
            return self._values[key]
        return self.reveal(key, compute())

    def is_revealed(self, key: tuple) -> bool:
        return key in self._values

    def require(self, key: tuple) -> None:
        if self.enforce and key not in self._values:
            raise ExposureError(f"{key!r} read before it was revealed")

    def read(self, key: tuple) -> object:
        self.require(key)
        return self._values.get(key)

    def forbid(self, key: tuple) -> None:
        if self.enforce and key in self._values:
            raise ExposureError(f"{key!r} must not be revealed at this point")

    def checkpoint(self) -> int:
        return len(self.log)

    def rollback(self, mark: int) -> None:
        for key in self.log[mark:]:
            self._values.pop(key, None)
        del self.log[mark:]

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = defaultdict(int)
        for key in self.log:
            out[key[0]] += 1
        return dict(sorted(out.items()))
