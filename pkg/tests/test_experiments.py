import csv
import io
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from rainbowham.experiments import (
    COLUMNS,
    Cell,
    SweepConfig,
    bin9_sweep,
    binomial_tail_check,
    coupling_diagnostic,
    diagnostics_run,
    evaluate,
    measure_sample,
    monte_carlo,
    prune_survival,
    rows_to_csv,
    rows_to_json,
    violation_rates,
)
from rainbowham.core import RandomSource
from rainbowham.params import derive_parameters, explicit_parameters
from rainbowham.sampler import sample_from_arcs, sample_layered


def test_evaluate():
    assert evaluate("4*log(n)/n", 100) == pytest.approx(4 * math.log(100) / 100)
    assert evaluate("1.5*n", 10) == 15
    assert evaluate("-sqrt(n)+ceil(2.5)", 16) == -1
    assert evaluate(0.25, 7) == 0.25
    for bad in ("__import__('os')", "n.real", "log(n, 2)", "m+1", "1+"):
        with pytest.raises(ValueError):
            evaluate(bad, 5)


def test_cell_modes():
    c = Cell(100, "target", p="4*log(n)/n", kappa="1.5*n", L=8)
    ps = c.params()
    assert ps.kappa == 150 and ps.L_effective == 8
    c = Cell(100, "explicit", p1="0", p2="0.1", p3="0", kappa="2*n")
    assert c.params().p_1 == 0
    assert Cell(300, "derived", eps=0.3, theta=0.3).params().n == 300


def test_zero_probability_grid_never_succeeds():
    cfg = SweepConfig([30], trials=3, explicit=[("0", "0", "0")], kappas=["n"])
    (row,) = monte_carlo(cfg)
    assert row["successes"] == 0 and row["success_fraction"] == 0.0
    assert row["trials"] == 3 and not row["truncated"]
    assert sum(row[f"fail_{s}"] for s in ("sample", "S-sets", "cover", "long-path", "segments", "linker")) == 3


def test_empty_grid_and_bad_trials():
    with pytest.raises(ValueError):
        SweepConfig([30])
    with pytest.raises(ValueError):
        SweepConfig([30], trials=0, ps=["0.1"], kappas=["n"])


def small_cfg(**kw):
    base = dict(ns=[40, 60], trials=3, ps=["3*log(n)/n"], kappas=["2*n"], base_seed=5)
    base.update(kw)
    return SweepConfig(**base)


def test_mc_jobs_do_not_change_rows():
    a = monte_carlo(small_cfg(jobs=1))
    b = monte_carlo(small_cfg(jobs=2))
    assert rows_to_csv(a) == rows_to_csv(b)
    assert rows_to_json(a) == rows_to_json(b)


def test_mc_cells_independent():
    both = monte_carlo(small_cfg())
    alone = monte_carlo(small_cfg(ns=[60]))
    assert both[1] == alone[0]


def test_csv_columns():
    rows = monte_carlo(small_cfg(ns=[40], trials=1))
    rd = list(csv.DictReader(io.StringIO(rows_to_csv(rows))))
    assert list(rd[0]) == list(COLUMNS)
    assert rd[0]["n"] == "40" and rd[0]["oracle_found"] == ""


def test_mc_oracle_check_small():
    cfg = SweepConfig([8], trials=2, explicit=[("0.3", "0.6", "0.3")], kappas=["3*n"], oracle_check=True)
    (row,) = monte_carlo(cfg)
    assert row["oracle_found"] is not None and 0 <= row["oracle_found"] <= 2


# -- binomial tail -------------------------------------------------------------------


def test_bin9_examples():
    r = binomial_tail_check(100, 0.5)
    assert r["k"] == 5 and r["holds"] and r["in_scope"]
    r = binomial_tail_check(10, 0.05)
    assert r["k"] == 0
    assert r["exact"] == pytest.approx(0.95 ** 10, rel=1e-12)
    assert r["bound"] == pytest.approx(math.exp(-0.533 * 0.5))
    assert r["holds"] and not r["in_scope"]
    with pytest.raises(ValueError):
        binomial_tail_check(10, 0.0)
    with pytest.raises(ValueError):
        binomial_tail_check(0, 0.5)


@settings(max_examples=80)
@given(st.integers(1, 50), st.floats(0.01, 0.99))
def test_bin9_matches_naive_sum(m, q):
    r = binomial_tail_check(m, q)
    k = math.floor(m * Fraction(repr(q)) / 9)
    naive = sum(math.comb(m, j) * q ** j * (1 - q) ** (m - j) for j in range(k + 1))
    assert r["exact"] == pytest.approx(naive, rel=1e-9)
    assert r["rel_error"] < 1e-9


def test_bin9_sweep_reports_threshold():
    out = bin9_sweep(0.5, [5, 10, 30, 50, 100])
    assert all(r["holds"] for r in out["rows"] if r["mq"] >= 30)
    assert out["holds_from_mq"] is not None and out["holds_from_mq"] <= 30


# -- diagnostics ------------------------------------------------------------------


def test_measure_sample_flags():
    ps = explicit_parameters(12, 0.1, 0.1, 0.1, 36)
    m = measure_sample(sample_from_arcs(ps, {}))
    # empty layers: everything is dangerous, nothing spans an edge
    assert m["S"]["value"] == 12 and m["max_degree"]["within"]
    assert m["e_S_prime"]["value"] == 0 and m["e_S_prime"]["within"]
    assert m["S00"]["value"] == 12 and not m["S00"]["within"]
    assert all(set(v) == {"value", "bound", "within"} for v in m.values())


def test_diagnostics_run_and_rates():
    ps = derive_parameters(300, 0.3, 0.3, 5)
    rows = diagnostics_run(ps, 2, base_seed=1)
    assert [r["trial"] for r in rows] == [0, 1]
    rates = violation_rates(rows)
    assert set(rates) >= {"S", "max_degree", "e_S_prime", "S00"}
    assert all(0 <= v <= 1 for v in rates.values())
    assert diagnostics_run(ps, 2, base_seed=1) == rows


def test_diagnostics_full_has_pipeline_fields():
    ps = derive_parameters(300, 0.3, 0.3, 5)
    (row,) = diagnostics_run(ps, 1, full=True)
    assert "red" in row and "bad_endpoints" in row and isinstance(row["pipeline_success"], bool)


def test_coupling_and_prune_smoke():
    d = coupling_diagnostic(r=10, delta=5, L=8, n=10**6, p1=1e-4, theta_1=0.3, theta_sum=1.0, trials=5)
    assert d["trials"] == 5 and 0 <= d["fraction_dominated"] <= 1
    assert d["q"] == pytest.approx(130 * 8 * math.log(10**6) / 10**6)
    frac = prune_survival({"r": 10, "d_out": [8] * 10, "d_in": [8] * 10, "colors": range(1, 10**4)}, 10)
    assert 0 <= frac <= 1


def test_sample_seed_is_reused_for_diagnostics():
    ps = derive_parameters(200, 0.3, 0.3, 5)
    a = sample_layered(ps, RandomSource(3, "trial").child("sample"))
    b = sample_layered(ps, RandomSource(3, "trial").child("sample"))
    assert measure_sample(a) == measure_sample(b)
