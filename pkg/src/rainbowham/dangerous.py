"""Low-degree vertex sets and their closure.

``S0`` collects vertices whose out-degree in some ``D_i`` is at or below a
log-scale threshold.  ``S`` is the closure of ``S0`` under absorbing any
vertex with at least ``threshold`` out-neighbours (in one ``D_i``) inside the
current set.  ``S00`` is the set of vertices of small ``G2`` degree.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .core import ColoredGraph
from .sampler import LayeredSample


def s0_thresholds(s: LayeredSample) -> tuple[float, float, float]:
    ps = s.params
    ln = math.log(ps.n)
    return (
        ps.epsilon_1 * ps.theta_1 * ln / 20,
        ln / 20,
        ps.epsilon_3 * ps.theta_3 * ln / 20,
    )


def compute_S0(s: LayeredSample) -> tuple[set[int], set[int], set[int], set[int]]:
    """Return ``(S01, S02, S03, S0)``.  Reads only revealed out-degrees."""
    t = s0_thresholds(s)
    parts = []
    for i in (1, 2, 3):
        parts.append({v for v in range(1, s.n + 1) if s.ledger.read(("outdeg", i, v)) <= t[i - 1]})
    return parts[0], parts[1], parts[2], parts[0] | parts[1] | parts[2]


@dataclass
class DangerousSets:
    S01: set[int]
    S02: set[int]
    S03: set[int]
    S0: set[int]
    S: set[int]
    order: list[int]
    threshold: int
    S00: set[int] = field(default_factory=set)
    # out-arcs that point outside S, per layer, for vertices outside S
    residual: tuple[dict[int, int], dict[int, int], dict[int, int]] = field(default_factory=lambda: ({}, {}, {}))

    def summary(self) -> dict:
        return {
            "S0": len(self.S0),
            "S01": len(self.S01),
            "S02": len(self.S02),
            "S03": len(self.S03),
            "S": len(self.S),
            "absorbed": len(self.order),
            "threshold": self.threshold,
            "S00": len(self.S00),
            "S_cap_S00": len(self.S & self.S00),
        }


def _in_lists(s: LayeredSample, exclude: Optional[int]) -> list[list[list[int]]]:
    n = s.n
    ins = []
    for i in (1, 2, 3):
        lst: list[list[int]] = [[] for _ in range(n + 1)]
        for u in range(1, n + 1):
            if u == exclude:
                continue
            for v in s.D(i).out[u]:
                if v != exclude:
                    lst[v].append(u)
        ins.append(lst)
    return ins


def grow_S(
    s: LayeredSample,
    S0: Iterable[int],
    threshold: int = 4,
    exclude: Optional[int] = None,
    record: bool = True,
) -> DangerousSets:
    """Close ``S0`` under absorption; eligible vertices are taken in ascending id.

    ``exclude`` removes one vertex from the vertex set entirely (used for the
    threshold-3 variant built on ``[n]`` minus a vertex).  With ``record`` the
    arcs incident to ``S`` are marked revealed in the ledger.
    """
    n = s.n
    S = {v for v in S0 if v != exclude}
    ins = _in_lists(s, exclude)
    cnt = [[0] * (n + 1) for _ in range(3)]
    heap: list[int] = []
    queued = set()

    def touch(x: int) -> None:
        for i in range(3):
            for u in ins[i][x]:
                cnt[i][u] += 1
                if cnt[i][u] >= threshold and u not in S and u not in queued:
                    queued.add(u)
                    heapq.heappush(heap, u)

    for x in sorted(S):
        touch(x)
    order = []
    while heap:
        v = heapq.heappop(heap)
        if v in S:
            continue
        S.add(v)
        order.append(v)
        touch(v)
    residual: tuple[dict[int, int], dict[int, int], dict[int, int]] = ({}, {}, {})
    for v in range(1, n + 1):
        if v in S or v == exclude:
            continue
        for i in range(3):
            residual[i][v] = s.D(i + 1).outdeg(v) - cnt[i][v]
    S0set = {v for v in S0 if v != exclude}
    if record:
        led = s.ledger
        for v in sorted(S):
            led.reveal(("S_arcs", v), True)
        for v in range(1, n + 1):
            if v not in S and v != exclude:
                led.reveal(("residual", v), tuple(residual[i][v] for i in range(3)))
    return DangerousSets(set(), set(), set(), S0set, S, order, threshold, residual=residual)


def compute_S00(G2: ColoredGraph, n: Optional[int] = None) -> set[int]:
    n = G2.n if n is None else n
    t = math.log(n) / 10
    return {v for v in range(1, n + 1) if G2.degree(v) <= t}


def dangerous_sets(s: LayeredSample, threshold: int = 4) -> DangerousSets:
    S01, S02, S03, S0 = compute_S0(s)
    ds = grow_S(s, S0, threshold)
    ds.S01, ds.S02, ds.S03 = S01, S02, S03
    ds.S00 = compute_S00(s.G[1])
    return ds


def min_pairwise_distance(G2: ColoredGraph, A: Iterable[int], cutoff: Optional[int] = None) -> float:
    """Smallest G2-distance between two distinct members of ``A``.

    Multi-source BFS labels each vertex with its nearest source; the first
    time two different labels meet gives the answer.  With ``cutoff`` the
    search stops once distances exceed it and returns ``inf`` when no pair is
    that close.
    """
    A = sorted(set(A))
    if len(A) < 2:
        return math.inf
    owner = {a: a for a in A}
    dist = {a: 0 for a in A}
    q = deque(A)
    best = math.inf
    while q:
        x = q.popleft()
        if 2 * dist[x] + 1 >= best:
            break
        if cutoff is not None and dist[x] >= cutoff:
            break
        for y in G2.neighbors(x):
            if y not in dist:
                dist[y] = dist[x] + 1
                owner[y] = owner[x]
                q.append(y)
            elif owner[y] != owner[x]:
                best = min(best, dist[x] + dist[y] + 1)
    if cutoff is not None and best > cutoff:
        return math.inf
    return best


def directed_edges_spanned(s: LayeredSample, A: Iterable[int]) -> int:
    """Number of ordered pairs inside ``A`` joined by an arc of D1, D2 or D3."""
    A = set(A)
    arcs = set()
    for i in (1, 2, 3):
        for u in A:
            for v in s.D(i).out[u]:
                if v in A:
                    arcs.add((u, v))
    return len(arcs)


def max_neighbors_in(G2: ColoredGraph, A: Iterable[int]) -> int:
    A = set(A)
    return max((sum(1 for w in G2.neighbors(v) if w in A) for v in range(1, G2.n + 1)), default=0)
