"""Auxiliary digraph on segments and the final Hamilton cycle.

Vertex ``w_k`` of Γ stands for segment ``k``.  A D1 arc from ``b_j`` to
``a_k`` is an out-generation of ``w_j``; a D1 arc from ``a_k`` to ``b_j`` is
an in-generation of ``w_k``.  Both generate the Γ arc ``(j, k)``, which
corresponds to the G1 edge ``b_j a_k``.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import min_weight_full_bipartite_matching

from .core import ColoredGraph, HamiltonCycleCertificate, RandomSource, verify_rainbow_hamilton
from .errors import DegenerateInstanceError, InternalInconsistencyError
from .sampler import LayeredSample
from .segments import SegmentSystem

EXACT_LIMIT = 24


@dataclass(frozen=True)
class Generation:
    arc: tuple[int, int]
    color: int
    kind: str  # "out" or "in"
    owner: int
    source: tuple[int, int]  # the D1 arc behind it


@dataclass
class Gamma:
    r: int
    seg_ids: list[int]
    gens: list[Generation]
    out_gens: dict[int, list[Generation]]
    in_gens: dict[int, list[Generation]]
    F1: set[Generation]
    F2: set[Generation]
    self_loops: int = 0

    @property
    def E1(self) -> set[tuple[int, int]]:
        return {g.arc for g in self.gens}

    def degrees(self) -> tuple[int, int]:
        """(min out-generations, min in-generations) over all vertices."""
        return (
            min(len(self.out_gens[k]) for k in range(self.r)),
            min(len(self.in_gens[k]) for k in range(self.r)),
        )

    def summary(self) -> dict:
        dout, din = self.degrees()
        return {
            "r": self.r,
            "generations": len(self.gens),
            "E1": len(self.E1),
            "F1": len(self.F1),
            "F2": len(self.F2),
            "self_loops": self.self_loops,
            "min_out": dout,
            "min_in": din,
        }


def build_gamma(sys_: SegmentSystem, s: LayeredSample) -> Gamma:
    """Read Γ off the D1 arcs between the final endpoints."""
    ids = sorted(sys_.segs)
    r = len(ids)
    if r < 3:
        raise DegenerateInstanceError(f"Γ needs at least 3 vertices, got {r}")
    idx_a = {sys_.segs[k].a: i for i, k in enumerate(ids)}
    idx_b = {sys_.segs[k].b: i for i, k in enumerate(ids)}
    D1 = s.D(1)
    G1 = s.G[0]
    gens: list[Generation] = []
    out_g: dict[int, list[Generation]] = {k: [] for k in range(r)}
    in_g: dict[int, list[Generation]] = {k: [] for k in range(r)}
    loops = 0
    for i, k in enumerate(ids):
        g = sys_.segs[k]
        for w in D1.out[g.b]:
            j = idx_a.get(w)
            if j is None:
                continue
            if j == i:
                loops += 1
                continue
            gen = Generation((i, j), D1.arcs[(g.b, w)], "out", i, (g.b, w))
            gens.append(gen)
            out_g[i].append(gen)
        for w in D1.out[g.a]:
            j = idx_b.get(w)
            if j is None:
                continue
            if j == i:
                loops += 1
                continue
            gen = Generation((j, i), D1.arcs[(g.a, w)], "in", i, (g.a, w))
            gens.append(gen)
            in_g[i].append(gen)
    seen: set[tuple[int, int]] = set()
    F1 = set()
    for gen in gens:
        if gen.arc in seen:
            F1.add(gen)
        seen.add(gen.arc)
    F2 = {gen for gen in gens if G1.color(*gen.source) != gen.color}
    return Gamma(r, ids, gens, out_g, in_g, F1, F2, loops)


def sample_gamma(
    r: int,
    d_out,
    d_in,
    colors: range,
    rng: RandomSource,
) -> Gamma:
    """Γ in the uniform model: targets, sources and colors drawn independently.

    ``d_out[k]`` out-generations of ``w_k`` pick targets uniformly among the
    other vertices, then ``d_in[k]`` in-generations pick sources the same
    way; each draw is followed by its color, uniform over ``colors``.
    The first color drawn for an arc is its color; other generations of the
    arc in a different color land in F2.
    """
    if r < 3:
        raise DegenerateInstanceError(f"Γ needs at least 3 vertices, got {r}")
    gen = rng.generator
    gens: list[Generation] = []
    out_g: dict[int, list[Generation]] = {k: [] for k in range(r)}
    in_g: dict[int, list[Generation]] = {k: [] for k in range(r)}
    for k in range(r):
        for _ in range(int(d_out[k])):
            j = int(gen.integers(r - 1))
            j += j >= k
            c = colors[int(gen.integers(len(colors)))]
            g = Generation((k, j), c, "out", k, (k, j))
            gens.append(g)
            out_g[k].append(g)
        for _ in range(int(d_in[k])):
            j = int(gen.integers(r - 1))
            j += j >= k
            c = colors[int(gen.integers(len(colors)))]
            g = Generation((j, k), c, "in", k, (j, k))
            gens.append(g)
            in_g[k].append(g)
    first: dict[tuple[int, int], int] = {}
    F1 = set()
    for g in gens:
        if g.arc in first:
            F1.add(g)
        first.setdefault(g.arc, g.color)
    # an edge carries one color: later generations with another color conflict
    F2 = {g for g in gens if first[g.arc] != g.color}
    return Gamma(r, list(range(r)), gens, out_g, in_g, F1, F2)


@dataclass
class Selection:
    out: dict[int, list[Generation]]
    inn: dict[int, list[Generation]]

    @property
    def generations(self) -> list[Generation]:
        return [g for k in sorted(self.out) for g in self.out[k]] + [g for k in sorted(self.inn) for g in self.inn[k]]

    @property
    def colors(self) -> list[int]:
        return [g.color for g in self.generations]


@dataclass
class HallWitness:
    nodes: list[tuple[int, str]]
    colors: set[int]

    def to_json(self) -> dict:
        return {"nodes": [list(x) for x in self.nodes], "colors": sorted(self.colors)}


def _node_colors(gamma: Gamma) -> list[tuple[tuple[int, str], list[int]]]:
    out = []
    for k in range(gamma.r):
        for side, gl in (("+", gamma.out_gens[k]), ("-", gamma.in_gens[k])):
            out.append(((k, side), list(dict.fromkeys(g.color for g in gl))))
    return out


def select_rainbow_3in3out(gamma: Gamma, per_node: int = 3):
    """Pick ``per_node`` out- and in-generations per vertex, all colors distinct.

    This is a bipartite b-matching between vertex sides and colors, solved
    with ``per_node`` clones per side and BFS augmenting paths.  On failure a
    HallWitness is returned: a set X of sides whose colors number fewer than
    ``per_node * |X|``.
    """
    nodes = _node_colors(gamma)
    clones = [(i, c) for i in range(len(nodes)) for c in range(per_node)]
    adj = [nodes[i][1] for i, _ in clones]
    match_c: list[Optional[int]] = [None] * len(clones)
    match_col: dict[int, int] = {}

    def augment(root: int) -> bool:
        prev: dict[int, tuple[int, int]] = {}
        seen_cl = {root}
        q = deque([root])
        while q:
            cl = q.popleft()
            for col in adj[cl]:
                if col in prev:
                    continue
                prev[col] = (cl, match_col.get(col, -1))
                owner = match_col.get(col)
                if owner is None:
                    # flip the path ending at col
                    c = col
                    while True:
                        cl2, _ = prev[c]
                        old = match_c[cl2]
                        match_c[cl2] = c
                        match_col[c] = cl2
                        if cl2 == root:
                            return True
                        c = old
                if owner not in seen_cl:
                    seen_cl.add(owner)
                    q.append(owner)
        return False

    free = []
    for i in range(len(clones)):
        if not augment(i):
            free.append(i)
    if free:
        # sides reachable from unmatched clones by alternating paths
        seen_cl = set(free)
        cols: set[int] = set()
        q = deque(free)
        while q:
            cl = q.popleft()
            for col in adj[cl]:
                if col in cols:
                    continue
                cols.add(col)
                o = match_col.get(col)
                if o is not None and o not in seen_cl:
                    seen_cl.add(o)
                    q.append(o)
        X = sorted({nodes[clones[cl][0]][0] for cl in seen_cl})
        NX = {c for i, (name, cs) in enumerate(nodes) if name in X for c in cs}
        if len(NX) >= per_node * len(X):
            raise InternalInconsistencyError("Hall witness does not certify a deficiency")
        return HallWitness(X, NX)
    sel = Selection({k: [] for k in range(gamma.r)}, {k: [] for k in range(gamma.r)})
    for cl, col in enumerate(match_c):
        (k, side), _ = nodes[clones[cl][0]]
        pool = gamma.out_gens[k] if side == "+" else gamma.in_gens[k]
        gen = next(g for g in pool if g.color == col)
        (sel.out if side == "+" else sel.inn)[k].append(gen)
    for d in (sel.out, sel.inn):
        for k in d:
            d[k].sort(key=lambda g: (g.color, g.arc))
    return sel


@dataclass
class PruneFailure:
    vertex: int
    side: str
    reason: str = "too-few-arcs"

    def to_json(self) -> dict:
        return {"vertex": self.vertex, "side": self.side, "reason": self.reason}


@dataclass
class Pruned:
    arcs: dict[tuple[int, int], int]  # arc -> color
    dropped: dict[str, int] = field(default_factory=dict)


def prune_conflicts(gamma: Gamma, sel: Selection, keep: int = 2, drop_regenerated: bool = False):
    """Drop selected generations whose color is not the realized G1 color.

    Those are exactly the members of F2: the pair also carries the reverse D1
    arc and the coin gave the edge the other color.  With
    ``drop_regenerated`` every selected arc generated more than once is
    dropped as well, whatever its color.  Each vertex must keep ``keep`` of
    its own out- and in-choices.  Returns Pruned or PruneFailure.
    """
    mult = Counter(g.arc for g in gamma.gens)
    dropped: Counter = Counter()
    kept: dict[tuple[int, int], int] = {}

    def ok(g: Generation) -> bool:
        if g in gamma.F2:
            dropped["missing-edge"] += 1
            return False
        if drop_regenerated and mult[g.arc] > 1:
            dropped["regenerated"] += 1
            return False
        return True

    for side, d in (("out", sel.out), ("in", sel.inn)):
        for k in sorted(d):
            good = [g for g in d[k] if ok(g)]
            if len(good) < keep:
                return PruneFailure(k, side)
            for g in good:
                if kept.get(g.arc, g.color) != g.color:
                    raise InternalInconsistencyError(f"arc {g.arc} kept with two colors")
                kept[g.arc] = g.color
    return Pruned(kept, dict(dropped))


# -- Hamilton cycles in small digraphs ------------------------------------


@numba.njit(cache=True)
def _dp_hamilton(r, out_mask):
    """Bitmask DP from vertex 0; returns a cycle as an array or an empty one."""
    m = r - 1
    size = 1 << m
    reach = np.zeros(size, dtype=np.int64)
    for v in range(1, r):
        if out_mask[0] >> v & 1:
            reach[1 << (v - 1)] |= 1 << v
    for mask in range(1, size):
        ends = reach[mask]
        if ends == 0:
            continue
        for v in range(1, r):
            if ends >> v & 1:
                nxt = out_mask[v] & ~(mask << 1) & ~1
                w = 1
                while nxt >> w:
                    if nxt >> w & 1:
                        reach[mask | (1 << (w - 1))] |= 1 << w
                    w += 1
    full = size - 1
    path = np.empty(0, dtype=np.int64)
    last = -1
    for v in range(1, r):
        if reach[full] >> v & 1 and out_mask[v] & 1:
            last = v
            break
    if last < 0:
        return path
    path = np.empty(r, dtype=np.int64)
    path[0] = 0
    mask = full
    cur = last
    for i in range(r - 1, 0, -1):
        path[i] = cur
        prev_mask = mask & ~(1 << (cur - 1))
        if i == 1:
            break
        found = -1
        for u in range(1, r):
            if reach[prev_mask] >> u & 1 and out_mask[u] >> cur & 1:
                found = u
                break
        mask = prev_mask
        cur = found
    return path


@numba.njit(cache=True)
def _dfs_hamilton(r, out_ptr, out_idx, in_ptr, in_idx, start, keys, budget):
    """Depth-first extension with fewest-exits ordering and dead-end pruning.

    Returns ``(path, steps)``; ``path`` is empty when the budget runs out
    or the search space is exhausted (``steps < budget`` in that case).
    """
    visited = np.zeros(r, dtype=np.bool_)
    path = np.empty(r, dtype=np.int64)
    # candidate stacks: per depth the sorted list of next vertices
    cand = np.empty((r, r), dtype=np.int64)
    ncand = np.zeros(r, dtype=np.int64)
    ptr = np.zeros(r, dtype=np.int64)
    avail_in = np.zeros(r, dtype=np.int64)
    avail_out = np.zeros(r, dtype=np.int64)
    for v in range(r):
        avail_in[v] = in_ptr[v + 1] - in_ptr[v]
        avail_out[v] = out_ptr[v + 1] - out_ptr[v]
    steps = 0
    path[0] = start
    visited[start] = True
    depth = 0
    # build candidates for depth 0
    fill = True
    while True:
        if fill:
            end = path[depth]
            c = 0
            forced = -1
            nforced = 0
            for t in range(out_ptr[end], out_ptr[end + 1]):
                w = out_idx[t]
                if not visited[w]:
                    cand[depth, c] = w
                    c += 1
                    if avail_in[w] == 1:
                        forced = w
                        nforced += 1
            # a vertex whose only open predecessor is the end must come next
            if nforced == 1:
                cand[depth, 0] = forced
                c = 1
            elif nforced > 1:
                c = 0
            # sort by (remaining exits, random key)
            for a in range(1, c):
                x = cand[depth, a]
                b = a - 1
                while b >= 0:
                    y = cand[depth, b]
                    if avail_out[y] < avail_out[x] or (avail_out[y] == avail_out[x] and keys[y] <= keys[x]):
                        break
                    cand[depth, b + 1] = y
                    b -= 1
                cand[depth, b + 1] = x
            ncand[depth] = c
            ptr[depth] = 0
            fill = False
        if depth == r - 1:
            end = path[depth]
            for t in range(out_ptr[end], out_ptr[end + 1]):
                if out_idx[t] == start:
                    return path, steps
        advanced = False
        if depth < r - 1:
            while ptr[depth] < ncand[depth]:
                w = cand[depth, ptr[depth]]
                ptr[depth] += 1
                steps += 1
                if steps > budget:
                    return np.empty(0, dtype=np.int64), steps
                e = path[depth]
                # e stops being the end; w becomes visited
                dead = False
                for t in range(out_ptr[e], out_ptr[e + 1]):
                    x = out_idx[t]
                    avail_in[x] -= 1
                    if x != w and (not visited[x] or x == start) and avail_in[x] == 0:
                        dead = True
                for t in range(in_ptr[w], in_ptr[w + 1]):
                    y = in_idx[t]
                    avail_out[y] -= 1
                    if y != w and not visited[y] and avail_out[y] == 0:
                        dead = True
                visited[w] = True
                if depth + 2 < r and avail_out[w] == 0:
                    dead = True
                if not dead:
                    depth += 1
                    path[depth] = w
                    fill = True
                    advanced = True
                    break
                visited[w] = False
                for t in range(out_ptr[e], out_ptr[e + 1]):
                    avail_in[out_idx[t]] += 1
                for t in range(in_ptr[w], in_ptr[w + 1]):
                    avail_out[in_idx[t]] += 1
        if advanced:
            continue
        # backtrack
        if depth == 0:
            return np.empty(0, dtype=np.int64), steps
        w = path[depth]
        depth -= 1
        e = path[depth]
        visited[w] = False
        for t in range(out_ptr[e], out_ptr[e + 1]):
            avail_in[out_idx[t]] += 1
        for t in range(in_ptr[w], in_ptr[w + 1]):
            avail_out[in_idx[t]] += 1


@dataclass
class HamiltonResult:
    cycle: Optional[list[int]]
    mode: str  # exact | heuristic
    proven: bool  # for a missing cycle: True when the search was exhaustive
    steps: int = 0

    @property
    def found(self) -> bool:
        return self.cycle is not None


def _csr(r: int, arcs) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    outs: list[list[int]] = [[] for _ in range(r)]
    ins: list[list[int]] = [[] for _ in range(r)]
    for u, v in sorted(arcs):
        if u != v:
            outs[u].append(v)
            ins[v].append(u)

    def pack(lists):
        ptr = np.zeros(r + 1, dtype=np.int64)
        for i, lst in enumerate(lists):
            ptr[i + 1] = ptr[i] + len(lst)
        idx = np.array([x for lst in lists for x in lst], dtype=np.int64)
        return ptr, idx

    op, oi = pack(outs)
    ip, ii = pack(ins)
    return op, oi, ip, ii


def _cycle_cover(r: int, arcs: list[tuple[int, int]], gen) -> Optional[np.ndarray]:
    """Successor array of a random cycle cover, or None when there is none."""
    u = np.array([a for a, _ in arcs], dtype=np.int64)
    v = np.array([b for _, b in arcs], dtype=np.int64)
    m = sp.csr_matrix((gen.random(len(arcs)) + 1.0, (u, v)), shape=(r, r))
    try:
        row, col = min_weight_full_bipartite_matching(m)
    except ValueError:
        return None
    succ = np.empty(r, dtype=np.int64)
    succ[row] = col
    return succ


def _patch(r: int, succ: np.ndarray, outs, ins, arcset, gen, budget: int):
    """Merge the cycles of the cover ``succ`` into one.

    Two-arc exchanges swap the successors of ``a`` and ``b`` on different
    cycles, which joins the two cycles.  When none applies, a three-arc
    exchange rotates the successors of ``a``, ``b`` and ``c``: it joins three
    cycles when they are distinct and otherwise reshapes the cover so that
    two-arc exchanges can resume.  Returns ``(cycle or None, steps)``.
    """
    pred = np.empty(r, dtype=np.int64)
    pred[succ] = np.arange(r)
    steps = 0

    def rotate(a, b, c):
        sa, sb, sc = int(succ[a]), int(succ[b]), int(succ[c])
        succ[a], succ[b], succ[c] = sb, sc, sa
        pred[sb], pred[sc], pred[sa] = a, b, c

    while steps <= budget:
        label = np.full(r, -1, dtype=np.int64)
        k = 0
        for s0 in range(r):
            if label[s0] < 0:
                x = s0
                while label[x] < 0:
                    label[x] = k
                    x = succ[x]
                k += 1
        if k == 1:
            cyc = [0]
            while len(cyc) < r:
                cyc.append(int(succ[cyc[-1]]))
            return cyc, steps
        order = gen.permutation(r)
        merged = False
        for a in order:
            sa = int(succ[a])
            for x in outs[a]:
                if label[x] == label[a]:
                    continue
                steps += 1
                b = int(pred[x])
                if (b, sa) in arcset:
                    succ[a], succ[b] = x, sa
                    pred[x], pred[sa] = a, b
                    merged = True
                    break
            if merged:
                break
        if merged:
            continue
        reshape = None
        for a in order:
            sa = int(succ[a])
            for x in outs[a]:
                if label[x] == label[a]:
                    continue
                b = int(pred[x])
                for c in ins[sa]:
                    if c == a or c == b:
                        continue
                    steps += 1
                    if (b, int(succ[c])) not in arcset:
                        continue
                    if label[c] != label[a] and label[c] != label[b]:
                        rotate(a, b, c)
                        merged = True
                        break
                    if reshape is None:
                        reshape = (a, b, c)
                if merged:
                    break
            if merged or steps > budget:
                break
        if merged:
            continue
        if reshape is None:
            return None, steps
        rotate(*reshape)
    return None, steps


def hamilton_digraph(
    r: int,
    arcs,
    rng: Optional[RandomSource] = None,
    restarts: int = 20,
    budget: Optional[int] = None,
) -> HamiltonResult:
    """Directed Hamilton cycle on vertices ``0..r-1``.

    Exact bitmask DP up to ``EXACT_LIMIT`` vertices.  Above that each of
    ``restarts`` rounds draws a random cycle cover, patches its cycles
    together by two- and three-arc exchanges, and on failure runs a randomized depth-first search; all
    rounds share ``budget`` extension attempts (default ``50 r^2``).  A
    missing cycle cover or an exhausted search proves there is no cycle.
    """
    arcs = {(int(u), int(v)) for u, v in arcs if u != v}
    if r == 1:
        return HamiltonResult([0], "exact", True)
    if r == 2:
        ok = (0, 1) in arcs and (1, 0) in arcs
        return HamiltonResult([0, 1] if ok else None, "exact", True)
    if r <= EXACT_LIMIT:
        mask = np.zeros(r, dtype=np.int64)
        for u, v in arcs:
            mask[u] |= 1 << v
        path = _dp_hamilton(r, mask)
        if len(path):
            return HamiltonResult([int(x) for x in path], "exact", True)
        return HamiltonResult(None, "exact", True)
    op, oi, ip, ii = _csr(r, arcs)
    if np.any(op[1:] == op[:-1]) or np.any(ip[1:] == ip[:-1]):
        return HamiltonResult(None, "heuristic", True)
    arc_list = sorted(arcs)
    outs = [[int(x) for x in oi[op[v]:op[v + 1]]] for v in range(r)]
    ins = [[int(x) for x in ii[ip[v]:ip[v + 1]]] for v in range(r)]
    gen = (rng or RandomSource(0, "hamilton")).generator
    total = 50 * r * r if budget is None else budget
    per = max(total // restarts, 1)
    steps = 0
    for _ in range(restarts):
        succ = _cycle_cover(r, arc_list, gen)
        if succ is None:
            return HamiltonResult(None, "heuristic", True, steps)
        cyc, st = _patch(r, succ, outs, ins, arcs, gen, per)
        steps += st
        if cyc is not None:
            return HamiltonResult(cyc, "heuristic", False, steps)
        left = per - st
        if left <= 0:
            continue
        keys = gen.random(r)
        start = int(gen.integers(r))
        path, st = _dfs_hamilton(r, op, oi, ip, ii, start, keys, left)
        steps += min(st, left)
        if len(path):
            k = int(np.where(path == 0)[0][0])
            cyc = [int(x) for x in np.roll(path, -k)]
            return HamiltonResult(cyc, "heuristic", False, steps)
        if st <= left:
            return HamiltonResult(None, "heuristic", True, steps)
    return HamiltonResult(None, "heuristic", False, steps)


def is_hamilton_cycle(r: int, arcs, cycle: list[int]) -> bool:
    arcs = set(arcs)
    if sorted(cycle) != list(range(r)):
        return False
    return all((cycle[i], cycle[(i + 1) % r]) in arcs for i in range(r))


def stitch_cycle(
    sys_: SegmentSystem,
    gamma: Gamma,
    link: list[int],
    arc_colors: dict[tuple[int, int], int],
    g: ColoredGraph,
) -> HamiltonCycleCertificate:
    """Expand a Hamilton cycle of Γ into a rainbow Hamilton cycle of ``g``.

    Each segment is traversed from A to B; Γ arc ``(j, k)`` becomes the edge
    ``b_j a_k`` with its recorded color.
    """
    order: list[int] = []
    colors: list[int] = []
    r = len(link)
    for t, j in enumerate(link):
        seg = sys_.segs[gamma.seg_ids[j]]
        order += seg.verts
        colors += seg.colors
        k = link[(t + 1) % r]
        colors.append(arc_colors[(j, k)])
    cert = HamiltonCycleCertificate(tuple(order), tuple(colors))
    rep = verify_rainbow_hamilton(g, cert)
    if not rep.ok:
        raise InternalInconsistencyError("stitched cycle fails verification: " + "; ".join(rep.violations[:5]))
    return cert


def random_gamma(r: int, degree: int, rng: RandomSource) -> set[tuple[int, int]]:
    """Uncolored d-in/d-out digraph: every vertex picks ``degree`` distinct
    out-neighbours and ``degree`` distinct in-neighbours; repeats collapse."""
    gen = rng.generator
    arcs = set()
    for v in range(r):
        others = np.array([u for u in range(r) if u != v])
        for u in gen.choice(others, size=min(degree, r - 1), replace=False):
            arcs.add((v, int(u)))
        for u in gen.choice(others, size=min(degree, r - 1), replace=False):
            arcs.add((int(u), v))
    return arcs
