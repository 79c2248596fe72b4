"""Acceptance suite: one test per criterion, one printed pass/fail line each.

The simulation-backed criteria share a single 500-replication grid run at a
fixed seed (deterministic for any thread count).  Run with ``-v -s`` to see
the per-criterion lines as they happen.
"""

import json
import math
import os
import time
from importlib.resources import files

import numpy as np
import pytest

from orbmeta.adjusted import (
    _quad_log_integral,
    fit_orb_adjusted,
    reported_weight_term,
    unreported_term,
)
from orbmeta.cli import main as cli_main
from orbmeta.core import Params, fit_naive
from orbmeta.dataio import expand_grid, load_run_config, parse_dataset
from orbmeta.selection import SelectionSpec, parse_spec
from orbmeta.simulate import ScenarioConfig, run_grid

SEED = 20240901
N_SIM = 500
DATA_DIR = files("orbmeta") / "data"
ADJ_SPECS = ("A", "B:3", "C:3", "D:1.5:7", "D:7:1.5")


def report(name, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f"  ({detail})"
    print(line)
    return ok


@pytest.fixture(scope="session")
def sim():
    """All scenario cells the simulation criteria need, keyed by cell."""

    def cell(k, i2, mu, methods):
        return ScenarioConfig(K=k, mu=mu, i2=i2, gamma_dgm=1.5, n_sim=N_SIM,
                              seed=SEED, methods=methods)

    grid = [
        cell(15, 0.0, 0.0, ("naive", "complete", "adj:DGM:1.5")),
        cell(15, 0.9, 0.0, ("naive", "adj:DGM:1.5")),
        cell(15, 0.0, 0.8, ("naive",)),
        cell(30, 0.0, 0.0, ("complete", "adj:DGM:1.5")),
        cell(30, 0.9, 0.0, ("naive", "adj:DGM:1.5")),
        cell(15, 0.5, 0.4, ("naive",)),
        cell(5, 0.9, 0.0, ("naive", "adj:DGM:1.5")),
    ]
    workers = min(8, 4 * (os.cpu_count() or 1))
    rows, _ = run_grid(grid, parallelism=workers)
    return {(r.K, r.i2, r.mu, r.method, r.parameter): r for r in rows}


@pytest.fixture(scope="session")
def epilepsy_fits():
    fits = {}
    for key, fname in (
        ("freedom", "topiramate_seizure_freedom.csv"),
        ("reduction", "topiramate_50pct_reduction.csv"),
    ):
        ma = parse_dataset(str(DATA_DIR / fname), "counts")
        fits[key] = {"naive": fit_naive(ma)}
        for token in ADJ_SPECS:
            fits[key][token] = fit_orb_adjusted(ma, parse_spec(token))
    return fits


def test_quadrature_oracle_step_selection():
    # quadrature must match the normal-CDF closed forms on a 125-point grid
    t0 = time.time()
    mus = (-0.5, -0.2, 0.0, 0.3, 0.6)
    tau2s = (0.0, 0.01, 0.04, 0.16, 0.36)
    sigmas = (0.2, 0.35, 0.5, 0.75, 1.0)
    worst = 0.0
    for side in ("one", "two"):
        spec = SelectionSpec("A", p_side=side)
        for mu in mus:
            for tau2 in tau2s:
                for sigma in sigmas:
                    cf = unreported_term(Params(mu, tau2), sigma**2, spec)
                    q = _quad_log_integral(mu, tau2, sigma, spec, complement=True)
                    worst = max(worst, abs(cf - q))
    elapsed = time.time() - t0
    ok = worst < 1e-8 and elapsed < 1.0
    assert report("quadrature vs closed form (step selection, both sided)",
                  ok, f"worst |delta|={worst:.2e}, {elapsed:.2f}s")


def test_complementarity_of_weight_integrals():
    t0 = time.time()
    rng = np.random.default_rng(7)
    worst = 0.0
    for token in ADJ_SPECS:
        spec = parse_spec(token)
        for _ in range(50):
            params = Params(rng.normal(0, 0.8), rng.uniform(0.0, 0.5))
            sigma = rng.uniform(0.1, 1.5)
            total = math.exp(reported_weight_term(params, sigma, spec)) + math.exp(
                unreported_term(params, sigma**2, spec)
            )
            worst = max(worst, abs(total - 1.0))
    elapsed = time.time() - t0
    ok = worst < 1e-10 and elapsed < 1.0
    assert report("complementarity of reported/unreported integrals",
                  ok, f"worst |delta|={worst:.2e}, {elapsed:.2f}s")


def test_epilepsy_reanalysis(epilepsy_fits):
    t0 = time.time()
    naive_free = epilepsy_fits["freedom"]["naive"]
    naive_red = epilepsy_fits["reduction"]["naive"]
    ok_a = naive_free.ci_mu[0] > 0.0 and naive_red.ci_mu[0] > 0.0
    report("epilepsy (a): naive CIs exclude 0 on both outcomes", ok_a,
           f"freedom lo={naive_free.ci_mu[0]:.3f}, reduction lo={naive_red.ci_mu[0]:.3f}")

    adj_free = {t: epilepsy_fits["freedom"][t] for t in ADJ_SPECS}
    ok_b = all(f.ci_mu[0] < 0.0 < f.ci_mu[1] for f in adj_free.values())
    report("epilepsy (b): all adjusted CIs overlap 0 on seizure freedom", ok_b)

    mu = {t: adj_free[t].params.mu for t in ("A", "B:3", "C:3")}
    ok_c = mu["B:3"] <= mu["A"] <= mu["C:3"] <= naive_free.params.mu
    report("epilepsy (c): ordering B:3 <= A <= C:3 <= naive", ok_c,
           f"B={mu['B:3']:.3f} A={mu['A']:.3f} C={mu['C:3']:.3f} naive={naive_free.params.mu:.3f}")

    shifts = [abs(epilepsy_fits["reduction"][t].params.mu - naive_red.params.mu)
              for t in ADJ_SPECS]
    ok_d = max(shifts) < 0.1
    report("epilepsy (d): adjusted-naive shift small on 50% reduction", ok_d,
           f"max |shift|={max(shifts):.4f}")
    assert ok_a and ok_b and ok_c and ok_d
    assert time.time() - t0 < 10.0


def test_simulation_orb_impact(sim):
    null_flat = sim[(15, 0.0, 0.0, "naive", "mu")]
    null_het = sim[(15, 0.9, 0.0, "naive", "mu")]
    large_mu = sim[(15, 0.0, 0.8, "naive", "mu")]

    ok1 = null_flat.bias > 3 * null_flat.mcse_bias
    report("ORB impact: naive bias positive beyond 3 MCSE at K=15, I2=0, mu=0",
           ok1, f"bias={null_flat.bias:+.4f}, 3*mcse={3 * null_flat.mcse_bias:.4f}")
    ok2 = null_het.bias > null_flat.bias
    report("ORB impact: naive bias larger at I2=0.9 than I2=0", ok2,
           f"{null_het.bias:+.4f} vs {null_flat.bias:+.4f}")
    ok3 = large_mu.bias < null_flat.bias
    report("ORB impact: naive bias smaller at mu=0.8 than mu=0", ok3,
           f"{large_mu.bias:+.4f} vs {null_flat.bias:+.4f}")
    assert ok1 and ok2 and ok3


def test_simulation_correct_spec_recovery(sim):
    ok_all = True
    for k, i2 in ((15, 0.0), (15, 0.9), (30, 0.0), (30, 0.9)):
        row = sim[(k, i2, 0.0, "adj:DGM:1.5", "mu")]
        ok = abs(row.bias) <= 2 * row.mcse_bias
        ok_all &= report(
            f"recovery: matched-spec bias within 2 MCSE at K={k}, I2={i2:g}",
            ok, f"bias={row.bias:+.5f}, 2*mcse={2 * row.mcse_bias:.5f}",
        )
    naive5 = sim[(5, 0.9, 0.0, "naive", "mu")]
    adj5 = sim[(5, 0.9, 0.0, "adj:DGM:1.5", "mu")]
    ok5 = 0.0 < adj5.bias < naive5.bias
    ok_all &= report("recovery: K=5 adjusted bias reduced but nonzero", ok5,
                     f"adj={adj5.bias:+.4f} vs naive={naive5.bias:+.4f}")
    assert ok_all


def test_simulation_coverage_power(sim):
    naive = sim[(30, 0.9, 0.0, "naive", "mu")]
    adj = sim[(30, 0.9, 0.0, "adj:DGM:1.5", "mu")]
    ok1 = naive.coverage < 0.90
    report("coverage: naive below 0.90 at K=30, I2=0.9, mu=0", ok1,
           f"coverage={naive.coverage:.3f}")
    ok2 = naive.power > adj.power
    report("power: naive inflated above matched-spec adjustment", ok2,
           f"{naive.power:.3f} vs {adj.power:.3f}")
    band = 3 * math.sqrt(0.95 * 0.05 / adj.n_converged)
    ok3 = abs(adj.coverage - 0.95) <= band
    report("coverage: matched-spec within 0.95 +/- 3 MCSE", ok3,
           f"coverage={adj.coverage:.3f}, band=+/-{band:.3f}")
    assert ok1 and ok2 and ok3


def test_simulation_heterogeneity_underestimated(sim):
    row = sim[(15, 0.5, 0.4, "naive", "tau2")]
    ok = row.bias < -2 * row.mcse_bias
    assert report("heterogeneity: naive tau2 bias negative beyond 2 MCSE", ok,
                  f"bias={row.bias:+.5f}, 2*mcse={2 * row.mcse_bias:.5f}")


def test_profile_ci_nominal_coverage_without_orb(sim):
    # complete-data fits see no censoring: PL intervals should hit ~95%
    ok_all = True
    for k in (15, 30):
        row = sim[(k, 0.0, 0.0, "complete", "mu")]
        band = 3 * math.sqrt(0.95 * 0.05 / row.n_converged)
        ok_all &= report(
            f"profile CI coverage nominal on complete data at K={k}",
            abs(row.coverage - 0.95) <= band,
            f"coverage={row.coverage:.3f}, band=+/-{band:.3f}",
        )
    assert ok_all


def test_determinism_across_thread_counts(tmp_path):
    cfg = {
        "k": [5], "mu": [0.0, 0.4], "i2": [0.25], "gamma_dgm": [1.5],
        "n_sim": 6, "seed": 99, "methods": ["naive", "adj:DGM"],
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    out1, out8 = tmp_path / "t1", tmp_path / "t8"
    assert cli_main(["simulate", "--config", str(cfg_path), "--threads", "1",
                     "--out-dir", str(out1)]) == 0
    assert cli_main(["simulate", "--config", str(cfg_path), "--threads", "8",
                     "--out-dir", str(out8)]) == 0
    identical = (out1 / "perf.csv").read_bytes() == (out8 / "perf.csv").read_bytes()
    assert report("determinism: perf.csv byte-identical for threads 1 vs 8", identical)


def test_full_paper_scale_supported():
    # the full 150-scenario grid expands and runs end to end at desk scale;
    # the 3200-replication production run is supported but not exercised here
    rc = load_run_config(str(DATA_DIR / "paper_grid.json"))
    grid = expand_grid(rc)
    ok_size = len(grid) == 150 and rc.n_sim == 3200
    smoke = ScenarioConfig(K=grid[0].K, mu=grid[0].mu, i2=grid[0].i2,
                           gamma_dgm=grid[0].gamma_dgm, n_sim=2, seed=rc.seed,
                           methods=("naive", "adj:DGM"))
    rows, _ = run_grid([smoke], parallelism=1)
    ok_run = len(rows) == 4
    assert report("feasibility: paper-scale grid (150 scenarios, n_sim=3200) supported",
                  ok_size and ok_run, f"grid={len(grid)}, smoke rows={len(rows)}")
