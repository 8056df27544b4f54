"""Disjoint rainbow G2-paths covering the dangerous set.

Vertices of ``S`` with small G2-degree (``S ∩ S00``) are handled first with
paths of length 2 to 4 built from two arms leaving ``v``; each arm is either
one edge to a vertex outside ``S`` or two edges through another uncovered
vertex of ``S``.  Every remaining vertex of ``S`` gets a cherry ``x - v - y``
with ``x, y`` outside ``S``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .core import ColoredGraph, RandomSource
from .dangerous import DangerousSets


@dataclass
class PathCover:
    paths: list[list[int]] = field(default_factory=list)
    colors: list[list[int]] = field(default_factory=list)
    phase: list[str] = field(default_factory=list)

    @property
    def used_colors(self) -> set[int]:
        return {c for cs in self.colors for c in cs}

    @property
    def vertices(self) -> set[int]:
        return {v for p in self.paths for v in p}

    def summary(self) -> dict:
        return {
            "paths": len(self.paths),
            "covered": sum(len(p) - 2 for p in self.paths),
            "colors": sum(len(c) for c in self.colors),
        }


@dataclass
class CoverFailure:
    vertex: int
    reason: str  # no-disjoint-extension | no-fresh-colors | degree-too-low

    def to_json(self) -> dict:
        return {"vertex": self.vertex, "reason": self.reason}


def check_cover(G2: ColoredGraph, ds: DangerousSets, cover: PathCover) -> list[str]:
    """Violations of the cover contract (empty when valid)."""
    out = []
    S = ds.S
    seen: set[int] = set()
    colors: list[int] = []
    for path, cols, ph in zip(cover.paths, cover.colors, cover.phase):
        if len(path) < 3:
            out.append(f"path {path} too short")
            continue
        if path[0] in S or path[-1] in S:
            out.append(f"path {path} has an endpoint in S")
        if any(v not in S for v in path[1:-1]):
            out.append(f"path {path} has an interior vertex outside S")
        if ph == "general" and len(path) != 3:
            out.append(f"general-phase path {path} is not a cherry")
        if ph == "S00" and not 3 <= len(path) <= 5:
            out.append(f"S00-phase path {path} has length {len(path) - 1}")
        for a, b, c in zip(path, path[1:], cols):
            if G2.color(a, b) != c:
                out.append(f"edge ({a},{b}) missing from G2 or recolored")
        if seen & set(path):
            out.append(f"path {path} meets an earlier path")
        seen |= set(path)
        colors += cols
    if len(colors) != len(set(colors)):
        out.append("cover colors repeat")
    if not S <= seen:
        out.append(f"{len(S - seen)} vertices of S uncovered")
    return out


class _Cover:
    def __init__(self, G2: ColoredGraph, ds: DangerousSets, used_colors: set[int], order):
        self.G2 = G2
        self.S = ds.S
        self.used_v: set[int] = set()
        self.used_c = set(used_colors)
        self.order = order

    def nbrs(self, v: int) -> list[int]:
        return self.order(v, self.G2.neighbors(v))

    def arms(self, v: int, block: set[int], block_c: set[int]):
        """Candidate arms from ``v``: lists ``[x]`` or ``[x, y]`` ending outside S."""
        for x in self.nbrs(v):
            if x in self.used_v or x in block:
                continue
            c = self.G2.color(v, x)
            if c in self.used_c or c in block_c:
                continue
            if x not in self.S:
                yield [x], [c]
                continue
            for y in self.nbrs(x):
                if y == v or y in self.S or y in self.used_v or y in block:
                    continue
                c2 = self.G2.color(x, y)
                if c2 == c or c2 in self.used_c or c2 in block_c:
                    continue
                yield [x, y], [c, c2]

    def cover_low(self, v: int):
        if self.G2.degree(v) < 2:
            return CoverFailure(v, "degree-too-low")
        for arm1, col1 in self.arms(v, set(), set()):
            for arm2, col2 in self.arms(v, set(arm1), set(col1)):
                path = arm1[::-1] + [v] + arm2
                return path, col1[::-1] + col2
        return CoverFailure(v, self._diagnose(v))

    def cover_cherry(self, v: int):
        if self.G2.degree(v) < 2:
            return CoverFailure(v, "degree-too-low")
        cand = [x for x in self.nbrs(v) if x not in self.S and x not in self.used_v]
        if len(cand) < 2:
            return CoverFailure(v, "no-disjoint-extension")
        for i, x in enumerate(cand):
            cx = self.G2.color(v, x)
            if cx in self.used_c:
                continue
            for y in cand[i + 1:]:
                cy = self.G2.color(v, y)
                if cy != cx and cy not in self.used_c:
                    return [x, v, y], [cx, cy]
        return CoverFailure(v, "no-fresh-colors")

    def _diagnose(self, v: int) -> str:
        # would two disjoint arms exist if colors were ignored?
        saved, self.used_c = self.used_c, set()
        try:
            found = next((1 for a1, _ in self.arms(v, set(), set()) for _ in self.arms(v, set(a1), set())), None)
        finally:
            self.used_c = saved
        return "no-fresh-colors" if found else "no-disjoint-extension"

    def take(self, path: list[int], cols: list[int]) -> None:
        self.used_v.update(path)
        self.used_c.update(cols)


def cover_dangerous(
    G2: ColoredGraph,
    ds: DangerousSets,
    rng: Optional[RandomSource] = None,
    used_colors: Optional[set[int]] = None,
    shuffle: bool = False,
):
    """Cover ``ds.S`` by disjoint rainbow G2-paths, or return a CoverFailure.

    Neighbours are scanned in the graph's fixed order; with ``shuffle`` (used
    on retries) they are scanned in an order drawn from ``rng`` instead.
    """
    gen = rng.generator if (rng is not None and shuffle) else None
    if gen is None:
        def order(v, lst):
            return lst
    else:
        def order(v, lst):
            lst = list(lst)
            gen.shuffle(lst)
            return lst

    st = _Cover(G2, ds, used_colors or set(), order)
    cover = PathCover()
    low = sorted(ds.S & ds.S00)
    for v in low:
        if v in st.used_v:
            continue
        res = st.cover_low(v)
        if isinstance(res, CoverFailure):
            return res
        st.take(*res)
        cover.paths.append(res[0])
        cover.colors.append(res[1])
        cover.phase.append("S00")
    for v in sorted(ds.S):
        if v in st.used_v:
            continue
        res = st.cover_cherry(v)
        if isinstance(res, CoverFailure):
            return res
        st.take(*res)
        cover.paths.append(res[0])
        cover.colors.append(res[1])
        cover.phase.append("general")
    return cover
