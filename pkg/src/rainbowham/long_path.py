"""Greedy rainbow G2-path with red-vertex backtracking.

The walk keeps a path ``P``, an untouched set ``U`` and a red set ``R``.
A non-red terminus exposes the first half of its residual D2 out-list, a red
terminus the second half.  A chosen out-neighbour ``w`` is kept only if the
arcs ``(v,w)`` in D1o, ``(w,v)`` in D1o and ``(w,v)`` in D2o are all absent,
which is exactly the condition for ``vw`` to be a G2 edge.  All exposures go
through the sample's ledger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .core import RandomSource
from .cover import PathCover
from .dangerous import DangerousSets
from .sampler import LayeredSample


def stop_size(n: int) -> float:
    """Size of ``U`` below which the walk stops."""
    return n / (2 * math.log(n) ** (1 / 3))


def target_length(n: int) -> float:
    return n - n / math.log(n) ** (1 / 3)


@dataclass
class LongPathResult:
    path: list[int]
    colors: list[int]
    red: set[int]
    untouched: set[int]
    V2: set[int]
    target: float
    steps: int = 0
    restarts: int = 0
    ok: bool = True
    reason: Optional[str] = None
    trace: list[tuple] = field(default_factory=list)

    @property
    def red_count(self) -> int:
        return len(self.red)

    def summary(self) -> dict:
        return {
            "length": len(self.path),
            "target": self.target,
            "red": len(self.red),
            "untouched": len(self.untouched),
            "V2": len(self.V2),
            "steps": self.steps,
            "restarts": self.restarts,
        }


def residual_out_list(s: LayeredSample, S: set[int], v: int) -> list[int]:
    return [w for w in s.D(2).out[v] if w not in S]


def build_long_path(
    s: LayeredSample,
    ds: DangerousSets,
    cover: PathCover,
    rng: RandomSource,
    u_stop: Optional[float] = None,
    require_target: bool = True,
    keep_trace: bool = False,
) -> LongPathResult:
    """Run the greedy walk on ``V2 = [n] - S - cover``.

    ``u_stop`` overrides the size of ``U`` at which the walk stops (default
    ``n / (2 (log n)^(1/3))``); ``0`` runs until ``U`` is empty.
    """
    n = s.n
    led = s.ledger
    S = ds.S
    gen = rng.generator
    D1o = s.D_full(1).arcs
    D2o = s.D_full(2).arcs
    D2 = s.D(2).arcs
    stop = stop_size(n) if u_stop is None else u_stop
    stop = max(stop, 1)

    V2 = set(range(1, n + 1)) - S - cover.vertices
    used_c = set(cover.used_colors)
    U = set(V2)
    R: set[int] = set()
    P: list[int] = []
    Pc: list[int] = []
    trace: list[tuple] = []
    halves: dict[int, list[int]] = {}

    def pick_from_U() -> int:
        pool = sorted(U)
        return pool[int(gen.integers(len(pool)))]

    def half(v: int, which: int) -> list[int]:
        if v not in halves:
            led.require(("residual", v))
            halves[v] = residual_out_list(s, S, v)
        lst = halves[v]
        k = (len(lst) + 1) // 2
        part = lst[:k] if which == 1 else lst[k:]
        led.reveal(("half", v, which), tuple(part))
        return part

    def probe(a: int, b: int, layer: int, arcs) -> bool:
        return bool(led.probe(("probe", layer, a, b), lambda: (a, b) in arcs))

    def suitable(v: int, cands: list[int]) -> Optional[int]:
        for w in cands:
            if w in U and D2[(v, w)] not in used_c:
                return w
        return None

    def backtrack() -> bool:
        """Make the last non-red vertex red and the new terminus; restart if none."""
        nonlocal restarts
        for i in range(len(P) - 1, -1, -1):
            if P[i] not in R:
                R.add(P[i])
                for c in Pc[i:]:
                    used_c.discard(c)
                del P[i + 1:]
                del Pc[i:]
                return True
        if not U:
            return False
        for c in Pc:
            used_c.discard(c)
        P.clear()
        Pc.clear()
        w = pick_from_U()
        U.discard(w)
        P.append(w)
        restarts += 1
        return True

    def try_extend(v: int, w: int) -> bool:
        U.discard(w)
        bad = probe(v, w, 1, D1o) or probe(w, v, 1, D1o) or probe(w, v, 2, D2o)
        if bad:
            return False
        c = D2[(v, w)]
        P.append(w)
        Pc.append(c)
        used_c.add(c)
        return True

    restarts = 0
    steps = 0
    if U:
        v0 = pick_from_U()
        U.discard(v0)
        P.append(v0)
    while P and len(U) >= stop:
        steps += 1
        v = P[-1]
        if v not in R:
            w = suitable(v, half(v, 1))
            if w is None:
                R.add(v)
                if keep_trace:
                    trace.append(("red3", v))
                continue
            if try_extend(v, w):
                if keep_trace:
                    trace.append(("extend", v, w))
            else:
                R.add(v)
                R.add(w)
                if keep_trace:
                    trace.append(("probe-red", v, w))
        else:
            w = suitable(v, half(v, 2))
            if w is None:
                if keep_trace:
                    trace.append(("red4", v))
                if not backtrack():
                    break
                continue
            if try_extend(v, w):
                if keep_trace:
                    trace.append(("extend", v, w))
            else:
                R.add(w)
                if keep_trace:
                    trace.append(("probe-red4", v, w))
                if not backtrack():
                    break
    tgt = target_length(n)
    res = LongPathResult(list(P), list(Pc), R, set(U), V2, tgt, steps, restarts, trace=trace)
    if require_target and len(P) < tgt:
        res.ok = False
        res.reason = "too-short"
    if len(P) < 2:
        res.ok = False
        res.reason = "too-short"
    return res


def check_long_path(s: LayeredSample, ds: DangerousSets, cover: PathCover, res: LongPathResult) -> list[str]:
    out = []
    G2 = s.G[1]
    P = res.path
    if len(set(P)) != len(P):
        out.append("path repeats a vertex")
    if not set(P) <= res.V2:
        out.append("path leaves V2")
    for a, b, c in zip(P, P[1:], res.colors):
        if G2.color(a, b) != c:
            out.append(f"({a},{b}) is not a G2 edge of color {c}")
    cols = list(res.colors) + [c for cs in cover.colors for c in cs]
    if len(cols) != len(set(cols)):
        out.append("path and cover colors are not jointly rainbow")
    lost = res.V2 - set(P) - res.untouched - res.red
    if lost:
        out.append(f"{len(lost)} non-red touched vertices missing from the path")
    return out


def red_fraction_diagnostic(red_count: int, n: int) -> dict:
    bound = n * math.exp(-(math.log(n) ** (1 / 3)) / 300)
    return {"observed": red_count, "bound": bound, "within": red_count <= bound}
