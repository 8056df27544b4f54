"""End-to-end search for a rainbow Hamilton cycle in one layered sample."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

from .core import ColoredGraph, RandomSource, derive_seed, verify_rainbow_hamilton
from .cover import CoverFailure, check_cover, cover_dangerous
from .dangerous import dangerous_sets, max_neighbors_in, min_pairwise_distance
from .errors import DegenerateInstanceError, PathTooShortError
from .linker import (
    HallWitness,
    PruneFailure,
    build_gamma,
    hamilton_digraph,
    prune_conflicts,
    select_rainbow_3in3out,
    stitch_cycle,
)
from .long_path import build_long_path, red_fraction_diagnostic
from .oracle import exact_rainbow_hamilton
from .params import ParamSet, check_theorem_preconditions
from .sampler import LayeredSample, merge_to_colored_graph, sample_layered
from .segments import (
    absorb_leftovers,
    expose_endpoint_degrees,
    leftover_items,
    merge_bad_endpoints,
    split_into_segments,
)

SCHEMA_VERSION = 1
STAGES = ("sample", "S-sets", "cover", "long-path", "segments", "linker")


@dataclass
class PipelineOptions:
    retries_cover: int = 3
    retries_long_path: int = 1
    retries_linker: int = 3
    u_stop: Optional[float] = None
    require_target: bool = True
    separation: bool = True
    tail_as_path: bool = False
    good_threshold: Optional[float] = None
    final_threshold: Optional[float] = None
    hamilton_budget: Optional[int] = None
    drop_regenerated: bool = False
    oracle_fallback: bool = False
    oracle_budget: Optional[int] = 2_000_000
    timings: bool = False
    enforce_ledger: bool = True

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class TrialReport:
    seed: int
    params: dict
    options: dict
    stages: list[dict] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    certificate: Optional[dict] = None
    failure: Optional[dict] = None
    preconditions: dict = field(default_factory=dict)
    mode: str = "pipeline"
    schema_version: int = SCHEMA_VERSION

    @property
    def success(self) -> bool:
        return self.certificate is not None

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)


class _Fail(Exception):
    def __init__(self, stage: str, reason: str, detail: object = None):
        super().__init__(f"{stage}: {reason}")
        self.stage = stage
        self.reason = reason
        self.detail = detail


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


class _Run:
    def __init__(self, params: ParamSet, seed: int, opts: PipelineOptions, given: Optional[LayeredSample] = None):
        self.params = params
        self.given = given
        self.opts = opts
        self.rng = RandomSource(seed, "trial")
        self.report = TrialReport(seed, params.to_json(), opts.to_json())
        if params.n >= 16:
            self.report.preconditions = check_theorem_preconditions(params.n, params.epsilon, params.theta)
        else:
            self.report.preconditions = {"satisfied": False, "bound": None}
        self.diag = self.report.diagnostics

    def stage(self, name: str, fn, retries: int = 0):
        last = None
        for attempt in range(retries + 1):
            t0 = time.perf_counter()
            try:
                out = fn(attempt)
            except _Fail as f:
                last = f
                rec = {"stage": name, "status": "failed", "attempt": attempt, "reason": f.reason}
                if self.opts.timings:
                    rec["seconds"] = time.perf_counter() - t0
                self.report.stages.append(rec)
                continue
            rec = {"stage": name, "status": "ok", "attempt": attempt}
            if self.opts.timings:
                rec["seconds"] = time.perf_counter() - t0
            self.report.stages.append(rec)
            return out
        raise last  # type: ignore[misc]

    # stages ---------------------------------------------------------------

    def sample(self, attempt: int) -> LayeredSample:
        s = self.given or sample_layered(self.params, self.rng.child("sample"), enforce=self.opts.enforce_ledger)
        self.g = merge_to_colored_graph(s)
        self.diag["m"] = self.g.m
        self.diag["max_degree"] = self.g.max_degree()
        self.diag["max_degree_bound"] = 5 * math.log(self.params.n)
        return s

    def s_sets(self, attempt: int):
        ds = dangerous_sets(self.s)
        self.diag.update({k: v for k, v in ds.summary().items()})
        self.diag["S00_min_distance"] = min_pairwise_distance(self.s.G[1], ds.S00, cutoff=10)
        self.diag["max_G2_nbrs_in_S"] = max_neighbors_in(self.s.G[1], ds.S)
        return ds

    def cover(self, attempt: int):
        res = cover_dangerous(self.s.G[1], self.ds, self.rng.child(f"cover/{attempt}"), shuffle=attempt > 0)
        if isinstance(res, CoverFailure):
            raise _Fail("cover", res.reason, res.to_json())
        bad = check_cover(self.s.G[1], self.ds, res)
        if bad:
            raise _Fail("cover", "internal", bad[:5])
        self.diag["cover"] = res.summary()
        return res

    def long_path(self, attempt: int):
        mark = self.s.ledger.checkpoint()
        res = build_long_path(
            self.s,
            self.ds,
            self.cov,
            self.rng.child(f"long-path/{attempt}"),
            u_stop=self.opts.u_stop,
            require_target=self.opts.require_target,
        )
        self.diag["long_path"] = res.summary()
        self.diag["red"] = red_fraction_diagnostic(res.red_count, self.params.n)
        if not res.ok:
            self.s.ledger.rollback(mark)
            raise _Fail("long-path", res.reason or "failed", res.summary())
        return res

    def segments(self, attempt: int):
        o = self.opts
        L = self.params.L_effective
        try:
            sys_ = split_into_segments(self.lp.path, self.lp.colors, L)
        except PathTooShortError as e:
            raise _Fail("segments", "path-too-short", str(e)) from None
        expose_endpoint_degrees(self.s, sys_, "toward-B", o.good_threshold)
        items = leftover_items(sys_, self.lp.V2, self.cov.paths, self.cov.colors, o.tail_as_path)
        self.diag["leftovers"] = len(items)
        fail = absorb_leftovers(sys_, items, self.s, o.separation, o.good_threshold)
        self.diag["segments"] = sys_.summary()
        if fail is not None:
            raise _Fail("segments", fail.reason, fail.to_json())
        expose_endpoint_degrees(self.s, sys_, "toward-A", o.good_threshold)
        fail = merge_bad_endpoints(sys_, self.s, o.good_threshold, o.final_threshold)
        self.diag["segments"] = sys_.summary()
        if fail is not None:
            raise _Fail("segments", fail.reason, fail.to_json())
        return sys_

    def linker(self, attempt: int):
        try:
            gamma = build_gamma(self.sys, self.s)
        except DegenerateInstanceError as e:
            raise _Fail("linker", "degenerate", str(e)) from None
        self.diag["gamma"] = gamma.summary()
        sel = select_rainbow_3in3out(gamma)
        if isinstance(sel, HallWitness):
            raise _Fail("linker", "hall-violation", sel.to_json())
        pr = prune_conflicts(gamma, sel, drop_regenerated=self.opts.drop_regenerated)
        if isinstance(pr, PruneFailure):
            raise _Fail("linker", "prune", pr.to_json())
        self.diag["pruned"] = {"arcs": len(pr.arcs), **pr.dropped}
        hc = hamilton_digraph(gamma.r, pr.arcs, self.rng.child(f"linker/{attempt}"), budget=self.opts.hamilton_budget)
        self.diag["hamilton"] = {"mode": hc.mode, "found": hc.found, "proven": hc.proven, "steps": hc.steps}
        if not hc.found:
            reason = "no-cycle-proven" if hc.proven else "search-exhausted"
            raise _Fail("linker", reason)
        return stitch_cycle(self.sys, gamma, hc.cycle, pr.arcs, self.g)

    def run(self) -> TrialReport:
        o = self.opts
        try:
            self.s = self.stage("sample", self.sample)
            if o.oracle_fallback and self.params.n <= 12:
                return self.oracle()
            self.ds = self.stage("S-sets", self.s_sets)
            self.cov = self.stage("cover", self.cover, o.retries_cover)
            self.lp = self.stage("long-path", self.long_path, o.retries_long_path)
            self.sys = self.stage("segments", self.segments)
            cert = self.stage("linker", self.linker, o.retries_linker)
        except _Fail as f:
            self.report.failure = {"stage": f.stage, "reason": f.reason, "detail": f.detail}
            return self.finish()
        rep = verify_rainbow_hamilton(self.g, cert)
        if not rep.ok:
            self.report.failure = {"stage": "verify", "reason": "internal", "detail": rep.violations[:5]}
        else:
            self.report.certificate = cert.to_json()
        return self.finish()

    def oracle(self) -> TrialReport:
        self.report.mode = "oracle"
        res = exact_rainbow_hamilton(self.g, self.opts.oracle_budget)
        self.report.stages.append({"stage": "oracle", "status": res.status, "attempt": 0})
        if res.found and verify_rainbow_hamilton(self.g, res.certificate).ok:
            self.report.certificate = res.certificate.to_json()
        else:
            self.report.failure = {"stage": "oracle", "reason": res.status, "detail": None}
        return self.finish()

    def finish(self) -> TrialReport:
        self.report.diagnostics = _clean(self.diag)
        if hasattr(self, "s"):
            self.report.diagnostics["ledger"] = self.s.ledger.counts()
        return self.report


def find_rainbow_hamilton(params: ParamSet, seed: int, options: Optional[PipelineOptions] = None) -> TrialReport:
    """Run every stage on a fresh sample drawn from ``seed``.

    Failures are recorded in the report rather than raised.  The report is a
    deterministic function of ``(params, seed, options)`` unless timings are
    switched on.
    """
    return _Run(params, seed, options or PipelineOptions()).run()


def run_on_sample(s: LayeredSample, seed: int, options: Optional[PipelineOptions] = None) -> TrialReport:
    """Same as find_rainbow_hamilton but on an existing sample."""
    return _Run(s.params, seed, options or PipelineOptions(), s).run()


def trial_seed(base: int, *cell: object) -> int:
    return derive_seed(base, *cell)


def merged_graph(params: ParamSet, seed: int) -> ColoredGraph:
    """The colored graph a trial with this seed works on."""
    return merge_to_colored_graph(sample_layered(params, RandomSource(seed, "trial").child("sample")))
