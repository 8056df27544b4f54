"""Monte Carlo sweeps, per-trial diagnostics and the binomial tail check."""

from __future__ import annotations

import ast
import csv
import io
import json
import math
import operator
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures.process import BrokenProcessPool
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from itertools import product
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .core import RandomSource, derive_seed
from .dangerous import (
    dangerous_sets,
    directed_edges_spanned,
    grow_S,
    max_neighbors_in,
    min_pairwise_distance,
)
from .linker import HallWitness, PruneFailure, prune_conflicts, sample_gamma, select_rainbow_3in3out
from .oracle import exact_rainbow_hamilton
from .params import ParamSet, derive_parameters, explicit_parameters, params_from_target
from .pipeline import STAGES, PipelineOptions, find_rainbow_hamilton
from .sampler import LayeredSample, merge_to_colored_graph, sample_layered

# -- arithmetic expressions in n ------------------------------------------------

_FUNCS = {"log": math.log, "ln": math.log, "sqrt": math.sqrt, "exp": math.exp, "floor": math.floor, "ceil": math.ceil}
_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.FloorDiv: operator.floordiv,
    ast.Pow: operator.pow,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}


def evaluate(expr, n: int) -> float:
    """Evaluate a numeric expression such as ``'4*log(n)/n'``.

    Only numbers, ``n``, arithmetic and the functions log/ln/sqrt/exp/floor/ceil
    are allowed.
    """
    if isinstance(expr, (int, float)):
        return expr

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name):
            if node.id == "n":
                return n
            if node.id == "e":
                return math.e
            raise ValueError(f"unknown name {node.id!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
            if node.keywords or len(node.args) != 1:
                raise ValueError("functions take one positional argument")
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported expression: {ast.dump(node)}")

    try:
        tree = ast.parse(str(expr), mode="eval")
    except SyntaxError as e:
        raise ValueError(f"cannot parse {expr!r}") from e
    return ev(tree)


# -- sweep configuration ---------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    n: int
    mode: str  # derived | target | explicit
    eps: Optional[float] = None
    theta: Optional[float] = None
    p: Optional[str] = None
    kappa: Optional[str] = None
    p1: Optional[str] = None
    p2: Optional[str] = None
    p3: Optional[str] = None
    c1: Optional[str] = None
    c3: Optional[str] = None
    L: Optional[int] = None

    def key(self) -> tuple:
        return tuple(asdict(self).values())

    def params(self) -> ParamSet:
        n = self.n
        if self.mode == "derived":
            return derive_parameters(n, self.eps, self.theta, self.L)
        kappa = int(round(evaluate(self.kappa, n)))
        if self.mode == "target":
            return params_from_target(n, evaluate(self.p, n), kappa, self.L)
        return explicit_parameters(
            n,
            evaluate(self.p1, n),
            evaluate(self.p2, n),
            evaluate(self.p3, n),
            kappa,
            c1=None if self.c1 is None else int(round(evaluate(self.c1, n))),
            c3=None if self.c3 is None else int(round(evaluate(self.c3, n))),
            l_override=self.L,
            allow_zero=True,
        )


@dataclass
class SweepConfig:
    ns: list[int]
    trials: int = 10
    base_seed: int = 0
    eps: list[float] = field(default_factory=list)
    thetas: list[float] = field(default_factory=list)
    ps: list[str] = field(default_factory=list)
    kappas: list[str] = field(default_factory=list)
    explicit: list[tuple[str, str, str]] = field(default_factory=list)
    classes: Optional[tuple[str, str]] = None  # (c1, c3) expressions for explicit cells
    L: Optional[int] = None
    jobs: int = 1
    options: PipelineOptions = field(default_factory=PipelineOptions)
    oracle_check: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.cells():
            raise ValueError("the grid is empty")

    def cells(self) -> list[Cell]:
        out = []
        for n in self.ns:
            for e, t in product(self.eps, self.thetas):
                out.append(Cell(n, "derived", eps=e, theta=t, L=self.L))
            for p, k in product(self.ps, self.kappas):
                out.append(Cell(n, "target", p=str(p), kappa=str(k), L=self.L))
            for (p1, p2, p3), k in product(self.explicit, self.kappas):
                c1, c3 = self.classes or (None, None)
                out.append(
                    Cell(n, "explicit", p1=str(p1), p2=str(p2), p3=str(p3), kappa=str(k), c1=c1, c3=c3, L=self.L)
                )
        return out


def cell_seed(base: int, cell: Cell, trial: int) -> int:
    return derive_seed(base, cell.key(), trial)


# -- Monte Carlo ------------------------------------------------------------------

DIAG_KEYS = ("S0", "S", "S00", "red", "merges", "r")
COLUMNS = (
    ["n", "mode", "eps", "theta", "p", "kappa", "p1", "p2", "p3", "L", "trials", "successes", "success_fraction"]
    + [f"fail_{s}" for s in STAGES]
    + [f"mean_{k}" for k in DIAG_KEYS]
    + ["oracle_found", "truncated"]
)


def _trial(args) -> dict:
    cell, seed, options, oracle_check = args
    try:
        ps = cell.params()
    except Exception as e:  # invalid cell: record as a sampling failure
        return {"success": False, "stage": "sample", "reason": type(e).__name__, "diag": {}, "oracle": None}
    rep = find_rainbow_hamilton(ps, seed, options)
    d = rep.diagnostics
    diag = {
        "S0": d.get("S0"),
        "S": d.get("S"),
        "S00": d.get("S00"),
        "red": (d.get("red") or {}).get("observed"),
        "merges": (d.get("segments") or {}).get("merges"),
        "r": (d.get("segments") or {}).get("r"),
    }
    oracle = None
    if oracle_check:
        g = merge_to_colored_graph(sample_layered(ps, RandomSource(seed, "trial").child("sample")))
        oracle = exact_rainbow_hamilton(g, options.oracle_budget).status
    fail = rep.failure or {}
    return {"success": rep.success, "stage": fail.get("stage"), "reason": fail.get("reason"), "diag": diag, "oracle": oracle}


def _aggregate(cell: Cell, results: list[dict], trials: int, truncated: bool) -> dict:
    row = {
        "n": cell.n,
        "mode": cell.mode,
        "eps": cell.eps,
        "theta": cell.theta,
        "p": cell.p,
        "kappa": cell.kappa,
        "p1": cell.p1,
        "p2": cell.p2,
        "p3": cell.p3,
        "L": cell.L,
        "trials": len(results),
        "successes": sum(r["success"] for r in results),
    }
    row["success_fraction"] = row["successes"] / len(results) if results else 0.0
    for s in STAGES:
        row[f"fail_{s}"] = sum(1 for r in results if not r["success"] and r["stage"] == s)
    for k in DIAG_KEYS:
        vals = [r["diag"].get(k) for r in results if r["diag"].get(k) is not None]
        row[f"mean_{k}"] = float(np.mean(vals)) if vals else None
    orc = [r["oracle"] for r in results if r["oracle"] is not None]
    row["oracle_found"] = sum(1 for x in orc if x == "found") if orc else None
    row["truncated"] = truncated or len(results) < trials
    return row


def monte_carlo(cfg: SweepConfig) -> list[dict]:
    """One row per grid cell, in grid order.

    Trial seeds depend only on the base seed, the cell and the trial index,
    so rows do not depend on ``jobs`` or on the other cells.  If workers die
    the remaining rows are emitted with ``truncated`` set.
    """
    cells = cfg.cells()
    tasks = [(c, cell_seed(cfg.base_seed, c, t), cfg.options, cfg.oracle_check) for c in cells for t in range(cfg.trials)]
    results: list[dict] = []
    truncated = False
    try:
        if cfg.jobs > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
                for res in ex.map(_trial, tasks, chunksize=max(1, len(tasks) // (4 * cfg.jobs))):
                    results.append(res)
        else:
            for t in tasks:
                results.append(_trial(t))
    except (MemoryError, BrokenProcessPool):
        truncated = True
    rows = []
    for i, c in enumerate(cells):
        chunk = results[i * cfg.trials:(i + 1) * cfg.trials]
        rows.append(_aggregate(c, chunk, cfg.trials, truncated))
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else r[k]) for k in COLUMNS})
    return buf.getvalue()


def rows_to_json(rows: list[dict]) -> str:
    return json.dumps(rows, sort_keys=True, indent=2) + "\n"


# -- diagnostics ------------------------------------------------------------------


def _m(value, bound, within: bool) -> dict:
    if isinstance(value, float) and math.isinf(value):
        value = "inf"
    return {"value": value, "bound": bound, "within": bool(within)}


def measure_sample(s: LayeredSample) -> dict:
    """Structural measurements on one sample, each with its bound and a flag."""
    ps = s.params
    n = ps.n
    gamma = ps.gamma
    g = merge_to_colored_graph(s)
    ds = dangerous_sets(s)
    Sp = grow_S(s, ds.S0, threshold=3, record=False)
    eSp = directed_edges_spanned(s, Sp.S)
    G2 = s.G[1]
    dist = min_pairwise_distance(G2, ds.S00, cutoff=5)
    out = {
        "S0": _m(len(ds.S0), n ** (1 - gamma) / 3, len(ds.S0) <= n ** (1 - gamma) / 3),
        "S": _m(len(ds.S), n ** (1 - gamma), len(ds.S) <= n ** (1 - gamma)),
        "max_degree": _m(g.max_degree(), 5 * math.log(n), g.max_degree() <= 5 * math.log(n)),
        "e_S_prime": _m(eSp, 2 * len(Sp.S), eSp < 2 * len(Sp.S)),
        "S_prime_density": _m(eSp, 3 * len(Sp.order), eSp >= 3 * len(Sp.order)),
        "S_subset_S_prime": _m(len(ds.S - Sp.S), 0, ds.S <= Sp.S),
        "S00": _m(len(ds.S00), n ** 0.48, len(ds.S00) < n ** 0.48),
        "S00_distance": _m(dist, 5, dist >= 5),
        "G2_nbrs_in_S": _m(max_neighbors_in(G2, ds.S), 2 / gamma, max_neighbors_in(G2, ds.S) <= 2 / gamma),
    }
    return out


def diagnostics_run(
    params: ParamSet,
    trials: int,
    base_seed: int = 0,
    full: bool = False,
    options: Optional[PipelineOptions] = None,
) -> list[dict]:
    """Per-trial measurements.  With ``full`` the pipeline is also run to get
    the red count and bad-endpoint count."""
    rows = []
    n = params.n
    for t in range(trials):
        seed = derive_seed(base_seed, "diag", n, t)
        s = sample_layered(params, RandomSource(seed, "trial").child("sample"), enforce=False)
        row = {"trial": t, "seed": seed, **measure_sample(s)}
        if full:
            rep = find_rainbow_hamilton(params, seed, options)
            d = rep.diagnostics
            red = (d.get("red") or {}).get("observed")
            bound = n * math.exp(-(math.log(n) ** (1 / 3)) / 300)
            row["red"] = _m(red, bound, red is not None and red <= bound)
            seg = d.get("segments") or {}
            bad = (seg.get("bad_step1") or 0) + (seg.get("bad_step4") or 0) if seg else None
            bb = n * math.exp(-math.sqrt(math.log(n)))
            row["bad_endpoints"] = _m(bad, bb, bad is not None and bad <= bb)
            row["pipeline_success"] = rep.success
        rows.append(row)
    return rows


def violation_rates(rows: list[dict]) -> dict[str, float]:
    keys = [k for k, v in rows[0].items() if isinstance(v, dict)] if rows else []
    return {k: sum(1 for r in rows if not r[k]["within"]) / len(rows) for k in keys}


# -- binomial tail -------------------------------------------------------------------

BIN9_CONSTANT = 0.533
BIN9_SCOPE = 9.0


def _exact_cdf_fraction(m: int, q: Fraction, k: int) -> Fraction:
    return sum((Fraction(math.comb(m, j)) * q**j * (1 - q) ** (m - j) for j in range(k + 1)), Fraction(0))


def binomial_tail_check(m: int, q: float, cross_check_limit: int = 2000) -> dict:
    """``P(Bin(m, q) <= floor(mq/9))`` against ``exp(-0.533 mq)``.

    The CDF is summed in log space; for ``m`` up to ``cross_check_limit`` it is
    also computed in exact rational arithmetic and the relative discrepancy
    is reported.
    """
    if not (0 < q < 1):
        raise ValueError("q must lie strictly between 0 and 1")
    if m < 1:
        raise ValueError("m must be a positive integer")
    qf = Fraction(repr(q))
    k = math.floor(m * qf / 9)
    mq = m * q
    j = np.arange(k + 1)
    logpmf = (
        np.array([math.lgamma(m + 1) - math.lgamma(x + 1) - math.lgamma(m - x + 1) for x in j])
        + j * math.log(q)
        + (m - j) * math.log1p(-q)
    )
    log_exact = float(logsumexp(logpmf))
    log_bound = -BIN9_CONSTANT * mq
    out = {
        "m": m,
        "q": q,
        "mq": mq,
        "k": k,
        "exact": math.exp(log_exact),
        "log_exact": log_exact,
        "bound": math.exp(log_bound),
        "log_bound": log_bound,
        "holds": log_exact <= log_bound,
        "in_scope": mq >= BIN9_SCOPE,
        "rel_error": None,
    }
    if m <= cross_check_limit:
        ex = _exact_cdf_fraction(m, qf, k)
        ref = math.exp(log_exact)
        out["rel_error"] = abs(float((Fraction(ref) - ex) / ex)) if ex else 0.0
        # the decision is made exactly when the rational value is available
        out["holds"] = ex <= Fraction(math.exp(log_bound)) if ex > 0 else True
    return out


def bin9_sweep(q: float, mq_values) -> dict:
    """Check the tail bound across ``mq`` values; report where it starts to hold for good."""
    rows = []
    for mq in mq_values:
        m = max(1, int(round(mq / q)))
        rows.append(binomial_tail_check(m, q))
    first = None
    for i in range(len(rows)):
        if all(r["holds"] for r in rows[i:]):
            first = rows[i]["mq"]
            break
    return {"q": q, "rows": rows, "holds_from_mq": first}


# -- coupling diagnostic -------------------------------------------------------------


def coupling_diagnostic(
    r: int,
    delta: int,
    L: int,
    n: int,
    p1: float,
    theta_1: float,
    theta_sum: float,
    trials: int,
    seed: int = 0,
) -> dict:
    """Compare per-arc frequencies of ``E3 ∪ F2`` against ``q = 130 L log n / n``.

    Γ is drawn in the uniform model with ``delta`` generations per side; E3
    is the set of generated but unselected arcs and each arc enters F2
    independently with the priority-conflict probability.  A coupling into
    an independent arc set of density ``q`` needs every per-arc frequency to
    be at most ``q``.
    """
    q = 130 * L * math.log(n) / n
    f2 = 0.5 * p1 * theta_1 / (1 + theta_sum)
    colors = range(1, 12 * r + 1)
    hits = np.zeros((r, r))
    done = 0
    rs = RandomSource(seed, "coupling")
    for t in range(trials):
        g = sample_gamma(r, [delta] * r, [delta] * r, colors, rs.child(str(t)))
        sel = select_rainbow_3in3out(g)
        if isinstance(sel, HallWitness):
            continue
        chosen = {x.arc for x in sel.generations}
        gen = rs.child(f"f2/{t}").generator
        bad = {x.arc for x in g.gens if x.arc not in chosen}
        for arc in sorted(g.E1):
            if gen.random() < f2:
                bad.add(arc)
        for a, b in bad:
            hits[a, b] += 1
        done += 1
    freq = hits / max(done, 1)
    np.fill_diagonal(freq, 0.0)
    off = freq[~np.eye(r, dtype=bool)]
    return {
        "q": q,
        "trials": done,
        "max_frequency": float(off.max()) if off.size else 0.0,
        "mean_frequency": float(off.mean()) if off.size else 0.0,
        "fraction_dominated": float(np.mean(off <= q)) if off.size else 1.0,
        "contained": bool(off.size == 0 or off.max() <= q),
    }


def prune_survival(gamma_kwargs: dict, trials: int, seed: int = 0) -> float:
    """Fraction of uniform-model Γ draws that survive selection and pruning."""
    ok = 0
    rs = RandomSource(seed, "prune")
    for t in range(trials):
        g = sample_gamma(rng=rs.child(str(t)), **gamma_kwargs)
        sel = select_rainbow_3in3out(g)
        if isinstance(sel, HallWitness):
            continue
        if not isinstance(prune_conflicts(g, sel), PruneFailure):
            ok += 1
    return ok / trials


def with_options(cfg: SweepConfig, **kw) -> SweepConfig:
    return replace(cfg, options=replace(cfg.options, **kw))
