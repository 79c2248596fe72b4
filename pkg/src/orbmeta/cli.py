"""Command-line surface: adjust, simulate, summarize.

Exit codes: 0 success, 2 user/input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .adjusted import fit_orb_adjusted
from .core import CIError, FitResult, Params, fit_naive
from .dataio import (
    DataError,
    expand_grid,
    load_run_config,
    parse_dataset,
    read_perf_csv,
    write_adjust_csv,
    write_manifest,
    write_perf_csv,
    write_raw_csv,
)
from .selection import parse_spec
from .simulate import run_grid

METRICS = ("bias", "coverage", "power", "mse", "ese")


def _failed_fit(method: str) -> FitResult:
    nan = math.nan
    return FitResult(
        params=Params(nan, nan), ci_mu=(nan, nan), ci_tau2=(nan, nan),
        loglik=nan, converged=False, method=method,
    )


def _forest_table(results: list[FitResult]) -> str:
    lines = [
        f"{'method':<14} {'mu [95% CI]':<28} {'RR [95% CI]':<24} {'tau2':>8}"
    ]
    for r in results:
        if not r.converged and math.isnan(r.params.mu):
            lines.append(f"{r.method:<14} (fit failed)")
            continue
        mu, lo, hi = r.params.mu, r.ci_mu[0], r.ci_mu[1]
        mu_txt = f"{mu:7.3f} [{lo:7.3f}, {hi:7.3f}]"
        rr_txt = f"{math.exp(mu):6.3f} [{math.exp(lo):6.3f}, {math.exp(hi):6.3f}]"
        flag = "" if r.converged else "  (not converged)"
        lines.append(f"{r.method:<14} {mu_txt:<28} {rr_txt:<24} {r.params.tau2:8.4f}{flag}")
    return "\n".join(lines)


def cmd_adjust(args) -> int:
    try:
        ma = parse_dataset(args.data, args.format)
        specs = [parse_spec(tok, alpha=args.alpha) for tok in args.select.split(",") if tok.strip()]
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    results: list[FitResult] = []
    try:
        results.append(fit_naive(ma, level=args.level))
    except (ValueError, CIError) as exc:
        if len(ma.reported) < 2:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        results.append(_failed_fit("naive"))
    for spec in specs:
        try:
            results.append(fit_orb_adjusted(ma, spec, form=args.form, level=args.level))
        except (ValueError, CIError):
            results.append(_failed_fit(f"adj:{spec.label()}"))

    print(_forest_table(results))
    if args.out:
        write_adjust_csv(args.out, results)
    if not any(r.converged for r in results):
        print("error: no method converged", file=sys.stderr)
        return 3
    return 0


def cmd_simulate(args) -> int:
    try:
        rc = load_run_config(args.config)
        grid = expand_grid(rc)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out_dir if args.out_dir is not None else rc.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    perf_rows, raw_rows = run_grid(grid, parallelism=args.threads, emit_raw=rc.emit_raw)
    write_perf_csv(out_dir / "perf.csv", perf_rows)
    if raw_rows is not None:
        write_raw_csv(out_dir / "raw.csv", raw_rows)
    write_manifest(out_dir / "manifest.json", rc, n_scenarios=len(grid))
    print(f"wrote {out_dir / 'perf.csv'} ({len(grid)} scenarios, {len(perf_rows)} rows)")
    return 0


def cmd_summarize(args) -> int:
    if args.metric not in METRICS:
        print(f"error: unknown metric {args.metric!r}", file=sys.stderr)
        return 2
    if args.metric == "power" and args.parameter == "tau2":
        print("error: power is defined for mu only", file=sys.stderr)
        return 2
    try:
        rows = read_perf_csv(args.perf)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    rows = [r for r in rows if r["parameter"] == args.parameter]
    methods = list(dict.fromkeys(r["method"] for r in rows))
    blocks = sorted({(float(r["K"]), float(r["i2"])) for r in rows})
    gammas = sorted({float(r["gamma_dgm"]) for r in rows})
    for gamma in gammas:
        for k, i2 in blocks:
            sub = [
                r for r in rows
                if float(r["K"]) == k and float(r["i2"]) == i2
                and float(r["gamma_dgm"]) == gamma
            ]
            if not sub:
                continue
            print(f"# K={k:g}  I2={i2:g}  gamma_dgm={gamma:g}  metric={args.metric}"
                  f"  parameter={args.parameter}")
            header = f"{'mu':>6} " + " ".join(f"{m:>14}" for m in methods)
            print(header)
            for mu in sorted({float(r["mu"]) for r in sub}):
                cells = []
                for m in methods:
                    match = [r for r in sub if float(r["mu"]) == mu and r["method"] == m]
                    if match:
                        value = float(match[0][args.metric])
                        cells.append(f"{value:14.4f}")
                    else:
                        cells.append(f"{'-':>14}")
                print(f"{mu:6.2f} " + " ".join(cells))
            print()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orbmeta",
        description="Selection-model adjustment for outcome reporting bias in meta-analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_adj = sub.add_parser("adjust", help="fit naive and ORB-adjusted models to a dataset")
    p_adj.add_argument("--data", required=True, help="dataset CSV path")
    p_adj.add_argument("--format", choices=("counts", "effects"), default="counts")
    p_adj.add_argument("--select", default="A,B:3,C:3,D:1.5:7,D:7:1.5",
                       help="comma-separated selection specs, e.g. A,B:3,C:3")
    p_adj.add_argument("--alpha", type=float, default=0.05)
    p_adj.add_argument("--level", type=float, default=0.95)
    p_adj.add_argument("--form", choices=("simplified", "generic"), default="simplified")
    p_adj.add_argument("--out", default=None, help="write a result CSV here")
    p_adj.set_defaults(func=cmd_adjust)

    p_sim = sub.add_parser("simulate", help="run a simulation grid from a JSON config")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--threads", type=int, default=1)
    p_sim.add_argument("--out-dir", default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_sum = sub.add_parser("summarize", help="pivot a perf.csv into per-(K, I2) blocks")
    p_sum.add_argument("--perf", required=True)
    p_sum.add_argument("--metric", required=True)
    p_sum.add_argument("--parameter", choices=("mu", "tau2"), default="mu")
    p_sum.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
