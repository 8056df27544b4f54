"""Command line front end.

Subcommands
  gen      sample one graph and write it as .cgr (or the layered .lay form)
  find     run the pipeline once and print the TrialReport JSON
  oracle   exact rainbow Hamilton search on a .cgr file
  reduce   convert .cgr <-> .h3
  mc       Monte Carlo sweep, one row per grid cell
  diag     per-trial structural measurements with bounds and flags
  tail     exact binomial tail against exp(-0.533 mq)

Parameters come in three modes.  By default (n, eps, theta) are turned into
layer probabilities.  ``--p`` with ``--kappa`` targets a merged edge
probability.  ``--p1/--p2/--p3`` with ``--kappa`` set the layers directly.
Numeric options accept expressions in n such as ``4*log(n)/n`` or ``1.5*n``.

Exit status is 0 whenever the run completes, whatever the mathematical
outcome; 1 on I/O errors and 2 on invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Optional

from .core import RandomSource, read_cgr, write_cgr
from .errors import FormatError, RainbowHamError
from .experiments import (
    Cell,
    SweepConfig,
    binomial_tail_check,
    diagnostics_run,
    monte_carlo,
    rows_to_csv,
    rows_to_json,
    violation_rates,
)
from .oracle import NotRepresentable, exact_rainbow_hamilton, graph_to_hypergraph, hypergraph_to_graph, read_h3, write_h3
from .pipeline import PipelineOptions, find_rainbow_hamilton, run_on_sample
from .sampler import merge_to_colored_graph, read_lay, sample_layered, write_lay

MC_EPILOG = """CSV columns (JSON rows use the same keys):
  n, mode            grid size and parameter mode (derived | target | explicit)
  eps, theta         derived-mode inputs (empty otherwise)
  p, kappa           target probability and color count expressions
  p1, p2, p3         explicit layer probability expressions
  L                  segment length override (empty = derived)
  trials             trials actually completed for the cell
  successes          trials that produced a verified certificate
  success_fraction   successes / trials
  fail_<stage>       failures per stage: sample, S-sets, cover, long-path,
                     segments, linker
  mean_S0, mean_S    mean sizes of the low-degree and grown dangerous sets
  mean_S00           mean size of the low G2-degree set
  mean_red           mean red-vertex count of the long-path walk
  mean_merges        mean number of segment merges
  mean_r             mean final segment count
  oracle_found       trials whose graph the exact oracle found Hamiltonian
                     (only with --oracle-check)
  truncated          true if workers died and the cell is incomplete
"""


class ConfigError(Exception):
    pass


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _add_param_flags(p: argparse.ArgumentParser, many: bool = False, need_n: bool = True) -> None:
    g = p.add_argument_group("parameters")
    nargs = "+" if many else None
    g.add_argument("--n", type=int, nargs=nargs, required=need_n, help="vertex count")
    g.add_argument("--eps", type=float, nargs=nargs, default=None, help="epsilon (derived mode, default 0.3)")
    g.add_argument("--theta", type=float, nargs=nargs, default=None, help="theta (derived mode, default 0.3)")
    g.add_argument("--p", nargs=nargs, default=None, help="merged edge probability (target mode)")
    g.add_argument("--kappa", nargs=nargs, default=None, help="number of colors (target / explicit mode)")
    g.add_argument("--p1", default=None, help="D1 layer probability (explicit mode)")
    g.add_argument("--p2", default=None, help="D2 layer probability (explicit mode)")
    g.add_argument("--p3", default=None, help="D3 layer probability (explicit mode)")
    g.add_argument("--c1", default=None, help="size of color class 1 (explicit mode)")
    g.add_argument("--c3", default=None, help="size of color class 3 (explicit mode)")
    g.add_argument("--L", type=int, default=None, help="segment length override")
    p.add_argument("--seed", type=int, default=0)


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline")
    g.add_argument("--u-stop", type=float, default=None, help="untouched-set size at which the walk stops")
    g.add_argument("--no-separation", action="store_true", help="allow adjacent host segments during absorption")
    g.add_argument("--tail-as-path", action="store_true", help="absorb the discarded path tail as one piece")
    g.add_argument("--good-threshold", type=float, default=None, help="override the endpoint goodness threshold")
    g.add_argument("--final-threshold", type=float, default=None, help="override the final endpoint threshold")
    g.add_argument("--drop-regenerated", action="store_true", help="prune every duplicated Γ arc")
    g.add_argument("--oracle-fallback", action="store_true", help="use the exact oracle for n <= 12")
    g.add_argument("--timings", action="store_true", help="record stage timings (breaks byte determinism)")


def _options(a) -> PipelineOptions:
    return PipelineOptions(
        u_stop=a.u_stop,
        separation=not a.no_separation,
        tail_as_path=a.tail_as_path,
        good_threshold=a.good_threshold,
        final_threshold=a.final_threshold,
        drop_regenerated=a.drop_regenerated,
        oracle_fallback=a.oracle_fallback,
        timings=a.timings,
    )


def _cell(a, n: int) -> Cell:
    explicit = [a.p1, a.p2, a.p3]
    if any(x is not None for x in explicit):
        if any(x is None for x in explicit) or a.kappa is None:
            raise ConfigError("explicit mode needs --p1, --p2, --p3 and --kappa")
        return Cell(n, "explicit", p1=a.p1, p2=a.p2, p3=a.p3, kappa=a.kappa, c1=a.c1, c3=a.c3, L=a.L)
    if a.p is not None:
        if a.kappa is None:
            raise ConfigError("target mode needs --kappa")
        return Cell(n, "target", p=a.p, kappa=a.kappa, L=a.L)
    eps = 0.3 if a.eps is None else a.eps
    theta = 0.3 if a.theta is None else a.theta
    return Cell(n, "derived", eps=eps, theta=theta, L=a.L)


def _params(a):
    if a.n is None:
        raise ConfigError("--n is required")
    try:
        return _cell(a, a.n).params()
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(str(e)) from None


# -- subcommands ----------------------------------------------------------------


def cmd_gen(a) -> None:
    ps = _params(a)
    s = sample_layered(ps, RandomSource(a.seed, "trial").child("sample"), enforce=False)
    _emit(write_lay(s) if a.layered else write_cgr(merge_to_colored_graph(s)), a.out)


def cmd_find(a) -> None:
    opts = _options(a)
    if a.lay:
        rep = run_on_sample(read_lay(a.lay), a.seed, opts)
    else:
        rep = find_rainbow_hamilton(_params(a), a.seed, opts)
    _emit(rep.dumps() + "\n", a.out)


def cmd_oracle(a) -> None:
    g = read_cgr(a.graph)
    res = exact_rainbow_hamilton(g, a.budget)
    _emit(json.dumps(res.to_json(), sort_keys=True, indent=2) + "\n", a.out)


def cmd_reduce(a) -> None:
    src = Path(a.input)
    if src.suffix == ".cgr":
        _emit(write_h3(graph_to_hypergraph(read_cgr(src))), a.out)
        return
    if a.n is None or a.kappa is None:
        raise ConfigError("converting .h3 to .cgr needs --n and --kappa")
    g = hypergraph_to_graph(read_h3(src), a.n, a.kappa)
    if isinstance(g, NotRepresentable):
        sys.stderr.write(f"not representable: triple {g.triple}: {g.reason}\n")
        return
    _emit(write_cgr(g), a.out)


def _sweep(a) -> SweepConfig:
    explicit = []
    if any(x is not None for x in (a.p1, a.p2, a.p3)):
        if any(x is None for x in (a.p1, a.p2, a.p3)):
            raise ConfigError("explicit mode needs --p1, --p2 and --p3")
        explicit = [(a.p1, a.p2, a.p3)]
    ps = a.p or []
    kappas = a.kappa or []
    if (ps or explicit) and not kappas:
        raise ConfigError("--p and --p1/--p2/--p3 need --kappa")
    eps, thetas = a.eps or [], a.theta or []
    if not ps and not explicit and not eps and not thetas:
        eps, thetas = [0.3], [0.3]
    elif bool(eps) != bool(thetas):
        raise ConfigError("derived mode needs both --eps and --theta")
    classes = (a.c1, a.c3) if a.c1 is not None or a.c3 is not None else None
    try:
        return SweepConfig(
            ns=a.n,
            trials=a.trials,
            base_seed=a.seed,
            eps=eps,
            thetas=thetas,
            ps=ps,
            kappas=kappas,
            explicit=explicit,
            classes=classes,
            L=a.L,
            jobs=a.jobs,
            options=_options(a),
            oracle_check=a.oracle_check,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None


def cmd_mc(a) -> None:
    rows = monte_carlo(_sweep(a))
    _emit(rows_to_csv(rows) if a.format == "csv" else rows_to_json(rows), a.out)


def _flatten(rows: list[dict]) -> str:
    flat = []
    for r in rows:
        f = {}
        for k, v in r.items():
            if isinstance(v, dict):
                f[f"{k}"] = v["value"]
                f[f"{k}_bound"] = v["bound"]
                f[f"{k}_within"] = v["within"]
            else:
                f[k] = v
        flat.append(f)
    buf = io.StringIO()
    if flat:
        w = csv.DictWriter(buf, fieldnames=list(flat[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(flat)
    return buf.getvalue()


def cmd_diag(a) -> None:
    ps = _params(a)
    rows = diagnostics_run(ps, a.trials, a.seed, full=a.full, options=_options(a))
    if a.format == "csv":
        _emit(_flatten(rows), a.out)
    else:
        doc = {"params": ps.to_json(), "rows": rows, "violation_rates": violation_rates(rows)}
        _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", a.out)


def cmd_tail(a) -> None:
    if not a.m and not a.mq:
        raise ConfigError("give --m or --mq")
    rows = []
    for q in a.q:
        if not 0 < q < 1:
            raise ConfigError(f"q={q} must lie strictly between 0 and 1")
        for m in a.m or []:
            rows.append(binomial_tail_check(m, q))
        for mq in a.mq or []:
            rows.append(binomial_tail_check(max(1, round(mq / q)), q))
    if a.format == "csv":
        keys = ["m", "q", "mq", "k", "exact", "bound", "holds", "in_scope", "rel_error"]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=keys, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        _emit(buf.getvalue(), a.out)
    else:
        _emit(json.dumps(rows, sort_keys=True, indent=2) + "\n", a.out)


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rainbowham", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen", help="sample a colored graph")
    _add_param_flags(p)
    p.add_argument("--layered", action="store_true", help="write the three layers (.lay) instead of .cgr")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("find", help="run the pipeline once")
    _add_param_flags(p, need_n=False)
    _add_pipeline_flags(p)
    p.add_argument("--lay", default=None, help="run on a stored .lay sample instead of sampling")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_find)

    p = sub.add_parser("oracle", help="exact search on a .cgr file")
    p.add_argument("graph")
    p.add_argument("--budget", type=int, default=None, help="search-node budget (default unlimited)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("reduce", help="convert .cgr to .h3 or back")
    p.add_argument("input")
    p.add_argument("--n", type=int, default=None, help="graph vertex count (for .h3 input)")
    p.add_argument("--kappa", type=int, default=None, help="color count (for .h3 input)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser(
        "mc", help="Monte Carlo sweep", epilog=MC_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    _add_param_flags(p, many=True)
    _add_pipeline_flags(p)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--oracle-check", action="store_true", help="also run the exact oracle (small n only)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("diag", help="structure diagnostics")
    _add_param_flags(p)
    _add_pipeline_flags(p)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--full", action="store_true", help="also run the pipeline for red and bad-endpoint counts")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_diag)

    p = sub.add_parser("tail", help="binomial tail check")
    p.add_argument("--q", type=float, nargs="+", required=True)
    p.add_argument("--m", type=int, nargs="+", default=None)
    p.add_argument("--mq", type=float, nargs="+", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_tail)
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    try:
        a.func(a)
    except ConfigError as e:
        sys.stderr.write(f"error: {e}\n")
        return 2
    except (OSError, FormatError) as e:
        sys.stderr.write(f"error: {e}\n")
        return 1
    except RainbowHamError as e:
        sys.stderr.write(f"error: {e}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
