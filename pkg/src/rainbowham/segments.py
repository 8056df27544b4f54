"""Segment system built from the long path.

The path ``P`` is cut into segments of ``L`` vertices.  Each segment is
stored with its A-endpoint first and its B-endpoint last.  Endpoints that
are adjacent along ``P`` always share a type, so consecutive segments
alternate direction.

Leftover vertices and covering paths are spliced in with two G3 edges
landing at ``x`` and ``y`` inside two host segments.  The piece
``a_x..x, u..v, y..a_y`` then continues across the P-edge at ``a_y`` into
the neighbouring segment ``K``, which keeps one A- and one B-endpoint per
segment.  The tails ``x'..b_x`` and ``y'..b_y`` become segments with new
A-endpoints ``x'`` and ``y'``.

Blocks are not stored: they are the chains of segments whose facing
endpoints are still joined by an unused edge of ``P`` ("links").
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import InternalInconsistencyError, PathTooShortError
from .sampler import LayeredSample


def good_threshold(s: LayeredSample, L: int, denom: int = 180) -> float:
    ps = s.params
    return ps.epsilon_1 * ps.theta_1 * math.log(ps.n) / (denom * L)


@dataclass
class Segment:
    verts: list[int]
    colors: list[int]
    orig: Optional[int] = None  # index along P when untouched

    @property
    def a(self) -> int:
        return self.verts[0]

    @property
    def b(self) -> int:
        return self.verts[-1]

    def reversed(self) -> Segment:
        return Segment(self.verts[::-1], self.colors[::-1], self.orig)


@dataclass
class SegmentSystem:
    P: list[int]
    Pcolors: list[int]
    L: int
    segs: dict[int, Segment]
    r1: int
    stage: str = "A1/B1"
    next_id: int = 0
    pos: dict[int, int] = field(default_factory=dict)
    seg_of: dict[int, int] = field(default_factory=dict)
    B1: set[int] = field(default_factory=set)
    d_to_B1: dict[int, int] = field(default_factory=dict)
    d_to_A2: dict[int, int] = field(default_factory=dict)
    d_final: dict[int, int] = field(default_factory=dict)
    used_orig: set[int] = field(default_factory=set)
    splice_colors: set[int] = field(default_factory=set)
    stats: dict = field(default_factory=dict)
    discarded: list[int] = field(default_factory=list)

    # -- bookkeeping -----------------------------------------------------

    def add(self, seg: Segment) -> int:
        k = self.next_id
        self.next_id += 1
        self.segs[k] = seg
        for v in seg.verts:
            self.seg_of[v] = k
        return k

    def remove(self, k: int) -> Segment:
        seg = self.segs.pop(k)
        for v in seg.verts:
            if self.seg_of.get(v) == k:
                del self.seg_of[v]
        return seg

    @property
    def r(self) -> int:
        return len(self.segs)

    @property
    def A(self) -> set[int]:
        return {g.a for g in self.segs.values()}

    @property
    def B(self) -> set[int]:
        return {g.b for g in self.segs.values()}

    def endpoint_type(self, v: int) -> Optional[str]:
        k = self.seg_of.get(v)
        if k is None:
            return None
        g = self.segs[k]
        if v == g.a:
            return "A"
        if v == g.b:
            return "B"
        return None

    def pcolor(self, u: int, v: int) -> int:
        i, j = self.pos[u], self.pos[v]
        if abs(i - j) != 1:
            raise InternalInconsistencyError(f"({u},{v}) is not an edge of P")
        return self.Pcolors[min(i, j)]

    def link(self, e: int) -> Optional[int]:
        """Endpoint joined to endpoint ``e`` by an unused P-edge, if any."""
        i = self.pos.get(e)
        if i is None:
            return None
        k = self.seg_of[e]
        for j in (i - 1, i + 1):
            if 0 <= j < len(self.P):
                f = self.P[j]
                kf = self.seg_of.get(f)
                if kf is not None and kf != k and self.endpoint_type(f) is not None:
                    return f
        return None

    def blocks(self) -> list[list[tuple[int, bool]]]:
        """Chains of linked segments as ``(segment id, flipped)`` lists.

        ``flipped`` means the chain traverses the segment from B to A.
        A cyclic chain is cut at an A-A link.
        """
        seen: set[int] = set()
        out = []

        def walk(k: int, enter: int) -> list[tuple[int, bool]]:
            chain = []
            while True:
                g = self.segs[k]
                flipped = enter == g.b
                chain.append((k, flipped))
                seen.add(k)
                exit_ = g.a if flipped else g.b
                f = self.link(exit_)
                if f is None:
                    return chain
                k2 = self.seg_of[f]
                if k2 in seen:
                    return chain
                k, enter = k2, f

        for k in sorted(self.segs):
            if k in seen:
                continue
            g = self.segs[k]
            if self.link(g.a) is None:
                out.append(walk(k, g.a))
            elif self.link(g.b) is None:
                out.append(walk(k, g.b))
        for k in sorted(self.segs):
            if k in seen:
                continue
            # every segment in this chain has two links: a cycle
            g = self.segs[k]
            out.append(walk(k, g.a))
        return out

    def check(self, stage_good: Optional[set[int]] = None) -> list[str]:
        """Structural invariants; ``stage_good`` is the set of B1-good vertices."""
        out = []
        seen: set[int] = set()
        colors: list[int] = []
        for k, g in self.segs.items():
            if len(g.verts) < 2:
                out.append(f"segment {k} has fewer than two vertices")
            if len(g.colors) != len(g.verts) - 1:
                out.append(f"segment {k} color list has the wrong length")
            if seen & set(g.verts):
                out.append(f"segment {k} overlaps another segment")
            seen |= set(g.verts)
            colors += g.colors
        if len(colors) != len(set(colors)):
            out.append("segment colors repeat")
        for blk in self.blocks():
            ends = []
            first_k, first_f = blk[0]
            last_k, last_f = blk[-1]
            g0, g1 = self.segs[first_k], self.segs[last_k]
            ends.append(g0.b if first_f else g0.a)
            ends.append(g1.a if last_f else g1.b)
            for e in ends:
                if self.link(e) is not None:  # cyclic chain
                    continue
                if self.endpoint_type(e) != "A":
                    out.append(f"block extreme {e} is not of type A")
                elif stage_good is not None and e not in stage_good:
                    out.append(f"block extreme {e} is not B1-good")
        return out

    def summary(self) -> dict:
        return dict(self.stats, r=self.r)


def split_into_segments(P: list[int], colors: list[int], L: int) -> SegmentSystem:
    """Cut ``P`` into an even number of ``L``-vertex segments."""
    if L < 2:
        raise PathTooShortError("segments need at least two vertices")
    if len(P) < 2 * L:
        raise PathTooShortError(f"path of {len(P)} vertices cannot hold two segments of {L}")
    r = len(P) // L
    if r % 2:
        r -= 1
    sys_ = SegmentSystem(list(P), list(colors), L, {}, r)
    sys_.pos = {v: i for i, v in enumerate(P)}
    for k in range(r):
        verts = P[k * L:(k + 1) * L]
        cols = colors[k * L:(k + 1) * L - 1]
        seg = Segment(list(verts), list(cols), orig=k)
        if k % 2:
            seg = seg.reversed()
        sys_.add(seg)
    sys_.discarded = list(P[r * L:])
    sys_.B1 = sys_.B
    sys_.stats = {"r1": r, "discarded": len(sys_.discarded)}
    return sys_


def expose_endpoint_degrees(
    s: LayeredSample,
    sys_: SegmentSystem,
    side: str,
    threshold: Optional[float] = None,
) -> set[int]:
    """Reveal D1 counts toward B (``side='toward-B'``) or A (``'toward-A'``).

    ``toward-B`` counts ``d1(v; B1)`` for every segment vertex outside B1;
    ``toward-A`` counts ``d1(b; A)`` for every B-endpoint.  Returns the set of
    bad vertices under ``threshold`` (default the 180L threshold).
    """
    t = good_threshold(s, sys_.L) if threshold is None else threshold
    D1 = s.D(1)
    led = s.ledger
    bad = set()
    if side == "toward-B":
        target = sys_.B1
        for g in sys_.segs.values():
            for v in g.verts:
                if v in target:
                    continue
                d = sum(1 for w in D1.out[v] if w in target)
                led.reveal(("d1_to_B1", v), d)
                sys_.d_to_B1[v] = d
                if d < t:
                    bad.add(v)
        sys_.stats["bad_step1"] = len(bad)
    elif side == "toward-A":
        target = sys_.A
        for g in sys_.segs.values():
            b = g.b
            d = sum(1 for w in D1.out[b] if w in target)
            led.reveal(("d1_to_A2", b), d)
            sys_.d_to_A2[b] = d
            if d < t:
                bad.add(b)
        sys_.stats["bad_step4"] = len(bad)
    else:
        raise ValueError(f"unknown side {side!r}")
    return bad


@dataclass
class AbsorbFailure:
    leftover: int
    reason: str  # no-usable-G3-arc | color-exhausted | no-separated-host

    def to_json(self) -> dict:
        return {"leftover": self.leftover, "reason": self.reason}


@dataclass
class MergeFailure:
    vertex: int
    reason: str  # bad-extreme | short-block | final-threshold

    def to_json(self) -> dict:
        return {"vertex": self.vertex, "reason": self.reason}


class _Absorber:
    def __init__(self, s: LayeredSample, sys_: SegmentSystem, good: set[int], separation: bool):
        self.s = s
        self.sys = sys_
        self.good = good
        self.separation = separation
        self.D3 = s.D(3)
        self.G3 = s.G[2]

    def host_ok(self, k: int) -> bool:
        if not self.separation:
            return True
        g = self.sys.segs[k]
        if g.orig is None:
            return False
        return all(abs(g.orig - j) >= 2 for j in self.sys.used_orig)

    def host_pos(self, x: int) -> Optional[tuple[int, int]]:
        k = self.sys.seg_of.get(x)
        if k is None or not self.host_ok(k):
            return None
        g = self.sys.segs[k]
        i = g.verts.index(x)
        if not 2 <= i <= len(g.verts) - 3:
            return None
        if g.verts[i + 1] not in self.good:
            return None
        return k, i

    def candidates(self, u: int):
        """Hosts reachable from ``u`` along fresh G3 edges, in out-list order."""
        led = self.s.ledger
        for j, w in enumerate(self.D3.out[u]):
            key = ("d3_loc", u, j)
            if not led.is_revealed(key):
                led.reveal(key, w)
            c = self.D3.arcs[(u, w)]
            if self.G3.color(u, w) != c:
                continue
            if c in self.sys.splice_colors:
                continue
            hp = self.host_pos(w)
            if hp is None:
                continue
            yield w, c, hp

    def continuation(self, e: int, exclude: set[int]) -> Optional[int]:
        f = self.sys.link(e)
        if f is None or self.sys.endpoint_type(f) != "A":
            return None
        k = self.sys.seg_of[f]
        if k in exclude:
            return None
        return k

    def absorb(self, item: list[int], item_colors: list[int]):
        u, v = item[0], item[-1]
        for x, cx, (kx, ix) in self.candidates(u):
            for y, cy, (ky, iy) in self.candidates(v):
                if y == x or ky == kx or cy == cx:
                    continue
                if self.separation:
                    ox, oy = self.sys.segs[kx].orig, self.sys.segs[ky].orig
                    if abs(ox - oy) < 2:
                        continue
                kk = self.continuation(self.sys.segs[ky].a, {kx, ky})
                if kk is not None:
                    self.splice(item, item_colors, x, cx, kx, ix, y, cy, ky, iy, kk, via_y=True)
                    return None
                kk = self.continuation(self.sys.segs[kx].a, {kx, ky})
                if kk is not None:
                    self.splice(item, item_colors, x, cx, kx, ix, y, cy, ky, iy, kk, via_y=False)
                    return None
        return AbsorbFailure(u, self.diagnose(u, v))

    def diagnose(self, u: int, v: int) -> str:
        arcs = [(a, w) for a in {u, v} for w in self.D3.out[a] if self.G3.color(a, w) == self.D3.arcs[(a, w)]]
        if not arcs:
            return "no-usable-G3-arc"
        if all(self.D3.arcs[e] in self.sys.splice_colors for e in arcs):
            return "color-exhausted"
        return "no-separated-host"

    def splice(self, item, item_colors, x, cx, kx, ix, y, cy, ky, iy, kk, via_y: bool):
        sys_ = self.sys
        gx, gy = sys_.segs[kx], sys_.segs[ky]
        for g in (gx, gy):
            if g.orig is not None:
                sys_.used_orig.add(g.orig)
        # a_x .. x, u .. v, y .. a_y
        verts = gx.verts[:ix + 1] + list(item) + gy.verts[:iy + 1][::-1]
        cols = gx.colors[:ix] + [cx] + list(item_colors) + [cy] + gy.colors[:iy][::-1]
        rx = Segment(gx.verts[ix + 1:], gx.colors[ix + 1:])
        ry = Segment(gy.verts[iy + 1:], gy.colors[iy + 1:])
        gk = sys_.segs[kk]
        if via_y:
            link_c = sys_.pcolor(verts[-1], gk.a)
            piece = Segment(verts + gk.verts, cols + [link_c] + gk.colors)
        else:
            verts, cols = verts[::-1], cols[::-1]
            link_c = sys_.pcolor(verts[-1], gk.a)
            piece = Segment(verts + gk.verts, cols + [link_c] + gk.colors)
        for k in (kx, ky, kk):
            sys_.remove(k)
        sys_.add(piece)
        sys_.add(rx)
        sys_.add(ry)
        sys_.splice_colors.update((cx, cy))


def absorb_leftovers(
    sys_: SegmentSystem,
    leftovers: list[tuple[list[int], list[int]]],
    s: LayeredSample,
    separation: bool = True,
    good_threshold_override: Optional[float] = None,
    check_blocks: bool = False,
):
    """Splice every leftover path (vertex list, color list) into the system.

    Single vertices are passed as ``([u], [])``.  Leftovers are processed in
    the given order.  Returns None on success or an AbsorbFailure.
    """
    t = good_threshold(s, sys_.L) if good_threshold_override is None else good_threshold_override
    good = {v for v, d in sys_.d_to_B1.items() if d >= t}
    ab = _Absorber(s, sys_, good, separation)
    A1 = len(sys_.A)
    for tag, (verts, cols) in enumerate(leftovers):
        res = ab.absorb(verts, cols)
        if res is not None:
            sys_.stats["absorbed"] = tag
            return res
        if check_blocks:
            bad = sys_.check(good)
            if bad:
                raise InternalInconsistencyError("; ".join(bad))
    sys_.stage = "A2/B2"
    sys_.stats["absorbed"] = len(leftovers)
    sys_.stats["r2"] = sys_.r
    if len(sys_.A) != A1 or sys_.B != sys_.B1:
        raise InternalInconsistencyError("absorption changed |A| or B")
    return None


def _merge_run(sys_: SegmentSystem, run: list[tuple[int, bool]]) -> int:
    verts: list[int] = []
    cols: list[int] = []
    for k, flipped in run:
        g = sys_.segs[k]
        gv, gc = (g.verts[::-1], g.colors[::-1]) if flipped else (g.verts, g.colors)
        if verts:
            cols.append(sys_.pcolor(verts[-1], gv[0]))
        verts += gv
        cols += gc
    for k, _ in run:
        sys_.remove(k)
    seg = Segment(verts, cols)
    if verts[0] in sys_.B1:  # B-endpoints never change type
        seg = seg.reversed()
    return sys_.add(seg)


def merge_bad_endpoints(
    sys_: SegmentSystem,
    s: LayeredSample,
    good_threshold_override: Optional[float] = None,
    final_threshold_override: Optional[float] = None,
):
    """Merge runs of three linked segments until no bad endpoint faces a link.

    An A-endpoint is bad when it is B1-bad; a B-endpoint is bad when its
    revealed count toward A2 is below threshold.  Afterwards the final D1
    counts between A3 and B3 are revealed and checked.  Returns None or a
    MergeFailure.
    """
    t = good_threshold(s, sys_.L) if good_threshold_override is None else good_threshold_override

    def is_bad(e: int) -> bool:
        if e in sys_.B1:
            return sys_.d_to_A2.get(e, 0) < t
        return sys_.d_to_B1.get(e, 0) < t

    merges = 0
    changed = True
    while changed:
        changed = False
        for blk in sys_.blocks():
            ends = []
            for idx, (k, flipped) in enumerate(blk):
                g = sys_.segs[k]
                first, last = (g.b, g.a) if flipped else (g.a, g.b)
                ends.append((first, last))
            extremes = (ends[0][0], ends[-1][1])
            for e in extremes:
                if is_bad(e) and sys_.link(e) is None:
                    return MergeFailure(e, "bad-extreme")
            for i in range(len(blk) - 1):
                if is_bad(ends[i][1]) or is_bad(ends[i + 1][0]):
                    if len(blk) < 3:
                        return MergeFailure(ends[i][1] if is_bad(ends[i][1]) else ends[i + 1][0], "short-block")
                    lo = i - 1 if i >= 1 else i
                    if lo + 3 > len(blk):
                        lo = len(blk) - 3
                    _merge_run(sys_, blk[lo:lo + 3])
                    merges += 1
                    changed = True
                    break
            if changed:
                break
    sys_.stats["merges"] = merges
    sys_.stats["r3"] = sys_.r
    # final counts between A3 and B3
    t200 = good_threshold(s, sys_.L, 200) if final_threshold_override is None else final_threshold_override
    A3, B3 = sys_.A, sys_.B
    D1 = s.D(1)
    led = s.ledger
    worst = None
    for k in sorted(sys_.segs):
        g = sys_.segs[k]
        for e, target in ((g.a, B3), (g.b, A3)):
            d = sum(1 for w in D1.out[e] if w in target)
            led.reveal(("d1_final", e), d)
            sys_.d_final[e] = d
            if d < t200 and worst is None:
                worst = e
    sys_.stage = "A3/B3"
    if worst is not None:
        return MergeFailure(worst, "final-threshold")
    return None


def threshold_relation_holds() -> bool:
    """``1/180 - 1/200 == 1/1800`` in exact arithmetic."""
    return Fraction(1, 180) - Fraction(1, 200) == Fraction(1, 1800)


def leftover_items(
    sys_: SegmentSystem,
    V2: set[int],
    cover_paths: list[list[int]],
    cover_colors: list[list[int]],
    tail_as_path: bool = False,
) -> list[tuple[list[int], list[int]]]:
    """Leftovers in processing order: covering paths, then loose vertices."""
    items = [(list(p), list(c)) for p, c in zip(cover_paths, cover_colors)]
    on_segments = set(sys_.seg_of)
    tail = sys_.discarded
    if tail_as_path and tail:
        k = len(sys_.P) - len(tail)
        items.append((list(tail), list(sys_.Pcolors[k:k + len(tail) - 1])))
        skip = set(tail)
    else:
        skip = set()
    loose = sorted(v for v in V2 if v not in on_segments and v not in skip)
    items += [([v], []) for v in loose]
    return items
