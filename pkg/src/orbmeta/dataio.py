"""Dataset parsing, run configuration, and CSV/JSON persistence.

Two dataset formats:

* ``counts``: study,n_treat,n_ctrl,events_treat,events_ctrl — the literal
  token ``Unrep`` in both event columns marks an unreported outcome.
* ``effects``: study,n_total,y,sigma — empty y and sigma mark unreported.

All CSV output uses '.' decimals, 17-significant-digit floats and a fixed
column order, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

from .core import FitResult, MetaAnalysis, Study, log_rr_from_counts
from .simulate import DEFAULT_METHODS, PerfRow, ScenarioConfig

__all__ = [
    "DataError",
    "parse_dataset",
    "serialize_dataset",
    "RunConfig",
    "load_run_config",
    "expand_grid",
    "ADJUST_COLUMNS",
    "PERF_COLUMNS",
    "RAW_COLUMNS",
]

UNREP_TOKEN = "Unrep"

COUNTS_HEADER = ["study", "n_treat", "n_ctrl", "events_treat", "events_ctrl"]
EFFECTS_HEADER = ["study", "n_total", "y", "sigma"]

ADJUST_COLUMNS = [
    "method", "mu_hat", "mu_lo", "mu_hi",
    "tau2_hat", "tau2_lo", "tau2_hi", "loglik", "converged",
]
PERF_COLUMNS = [
    "K", "mu", "i2", "gamma_dgm", "n_per_arm", "n_sim", "method", "parameter",
    "bias", "ese", "mse", "coverage", "power",
    "mcse_bias", "mcse_ese", "mcse_mse", "mcse_coverage", "mcse_power",
    "n_converged",
]
RAW_COLUMNS = [
    "K", "mu", "i2", "gamma_dgm", "n_per_arm", "rep", "method",
    "mu_hat", "tau2_hat", "mu_lo", "mu_hi", "tau2_lo", "tau2_hi", "converged",
]


class DataError(ValueError):
    """Malformed dataset or configuration input."""


def fmt_float(x: float) -> str:
    """Full-precision decimal rendering (17 significant digits)."""
    return format(float(x), ".17g")


def _parse_int(text: str, what: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise DataError(f"line {line}: {what} must be an integer, got {text!r}") from None


def _parse_counts_row(row: dict, line: int) -> Study:
    study = row["study"].strip()
    if not study:
        raise DataError(f"line {line}: empty study id")
    n_treat = _parse_int(row["n_treat"], "n_treat", line)
    n_ctrl = _parse_int(row["n_ctrl"], "n_ctrl", line)
    et, ec = row["events_treat"].strip(), row["events_ctrl"].strip()
    unrep = (et == UNREP_TOKEN, ec == UNREP_TOKEN)
    if any(unrep) and not all(unrep):
        raise DataError(f"line {line}: '{UNREP_TOKEN}' must appear in both event columns")
    try:
        if all(unrep):
            return Study(id=study, n_treat=n_treat, n_ctrl=n_ctrl, reported=False)
        events_treat = _parse_int(et, "events_treat", line)
        events_ctrl = _parse_int(ec, "events_ctrl", line)
        y, sigma = log_rr_from_counts(events_treat, n_treat, events_ctrl, n_ctrl)
        return Study(
            id=study, n_treat=n_treat, n_ctrl=n_ctrl,
            events_treat=events_treat, events_ctrl=events_ctrl,
            y=y, sigma=sigma, reported=True,
        )
    except DataError:
        raise
    except ValueError as exc:
        raise DataError(f"line {line}: {exc}") from None


def _parse_effects_row(row: dict, line: int) -> Study:
    study = row["study"].strip()
    if not study:
        raise DataError(f"line {line}: empty study id")
    n_total = _parse_int(row["n_total"], "n_total", line)
    if n_total < 2:
        raise DataError(f"line {line}: n_total must be at least 2")
    # only the total matters downstream; split it into nominal arms
    n_ctrl = n_total // 2
    n_treat = n_total - n_ctrl
    y_txt, s_txt = row["y"].strip(), row["sigma"].strip()
    if (y_txt == "") != (s_txt == ""):
        raise DataError(f"line {line}: y and sigma must both be present or both empty")
    try:
        if y_txt == "":
            return Study(id=study, n_treat=n_treat, n_ctrl=n_ctrl, reported=False)
        return Study(
            id=study, n_treat=n_treat, n_ctrl=n_ctrl,
            y=float(y_txt), sigma=float(s_txt), reported=True,
        )
    except DataError:
        raise
    except ValueError as exc:
        raise DataError(f"line {line}: {exc}") from None


def parse_dataset(path: str | Path, format: str = "counts") -> MetaAnalysis:
    """Read a dataset file into a MetaAnalysis.

    Raises DataError (with the offending line number) on malformed input;
    an empty file is an error, not an empty meta-analysis.
    """
    if format not in ("counts", "effects"):
        raise DataError(f"unknown dataset format {format!r}")
    header = COUNTS_HEADER if format == "counts" else EFFECTS_HEADER
    parse_row = _parse_counts_row if format == "counts" else _parse_effects_row
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if [c.strip() for c in first] != header:
            raise DataError(
                f"{path}: header must be {','.join(header)!r}, got {','.join(first)!r}"
            )
        studies = []
        for line, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise DataError(f"line {line}: expected {len(header)} columns, got {len(raw)}")
            studies.append(parse_row(dict(zip(header, raw)), line))
    if not studies:
        raise DataError(f"{path}: no study rows")
    return MetaAnalysis(studies=tuple(studies))


def serialize_dataset(ma: MetaAnalysis, format: str = "counts") -> str:
    """Render a MetaAnalysis back to its CSV text (inverse of parse_dataset)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    if format == "counts":
        writer.writerow(COUNTS_HEADER)
        for s in ma.studies:
            if s.reported:
                if s.events_treat is None or s.events_ctrl is None:
                    raise DataError(f"study {s.id!r} has no count data")
                writer.writerow([s.id, s.n_treat, s.n_ctrl, s.events_treat, s.events_ctrl])
            else:
                writer.writerow([s.id, s.n_treat, s.n_ctrl, UNREP_TOKEN, UNREP_TOKEN])
    elif format == "effects":
        writer.writerow(EFFECTS_HEADER)
        for s in ma.studies:
            if s.reported:
                writer.writerow([s.id, s.n_total, fmt_float(s.y), fmt_float(s.sigma)])
            else:
                writer.writerow([s.id, s.n_total, "", ""])
    else:
        raise DataError(f"unknown dataset format {format!r}")
    return out.getvalue()


@dataclass(frozen=True)
class RunConfig:
    """Simulation run description: grid axes plus shared settings."""

    k: tuple[int, ...]
    mu: tuple[float, ...]
    i2: tuple[float, ...]
    gamma_dgm: tuple[float, ...]
    n_per_arm: int = 50
    n_sim: int = 1000
    seed: int = 0
    methods: tuple[str, ...] = DEFAULT_METHODS
    alpha: float = 0.05
    level: float = 0.95
    emit_raw: bool = False
    out_dir: str = "."

    def __post_init__(self):
        for name in ("k", "mu", "i2", "gamma_dgm"):
            values = getattr(self, name)
            object.__setattr__(self, name, tuple(values))
            if len(getattr(self, name)) == 0:
                raise DataError(f"config: axis {name!r} must be non-empty")
        object.__setattr__(self, "methods", tuple(self.methods))


_CONFIG_KEYS = {f.name for f in dataclasses.fields(RunConfig)}


def load_run_config(path: str | Path) -> RunConfig:
    """Load a flat JSON run configuration.

    Unknown keys are ignored, so a manifest written by a previous run can
    be fed back in.  ORB_SEED in the environment overrides the seed.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(payload, dict):
        raise DataError(f"{path}: config must be a JSON object")
    kwargs = {k: v for k, v in payload.items() if k in _CONFIG_KEYS}
    env_seed = os.environ.get("ORB_SEED")
    if env_seed is not None:
        try:
            kwargs["seed"] = int(env_seed)
        except ValueError:
            raise DataError(f"ORB_SEED must be an integer, got {env_seed!r}") from None
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None


def expand_grid(rc: RunConfig) -> list[ScenarioConfig]:
    """All scenario cells of the grid, in a fixed k/mu/i2/gamma order."""
    grid = []
    for k in rc.k:
        for mu in rc.mu:
            for i2 in rc.i2:
                for gamma in rc.gamma_dgm:
                    try:
                        grid.append(
                            ScenarioConfig(
                                K=int(k), mu=float(mu), i2=float(i2),
                                gamma_dgm=float(gamma), n_per_arm=int(rc.n_per_arm),
                                n_sim=int(rc.n_sim), seed=int(rc.seed),
                                methods=rc.methods, alpha=float(rc.alpha),
                                level=float(rc.level),
                            )
                        )
                    except ValueError as exc:
                        raise DataError(f"config: {exc}") from None
    return grid


def _cell(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return "nan" if math.isnan(value) else fmt_float(value)
    return str(value)


def write_adjust_csv(path: str | Path, results: list[FitResult]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ADJUST_COLUMNS)
        for r in results:
            writer.writerow(
                [
                    r.method,
                    _cell(r.params.mu), _cell(r.ci_mu[0]), _cell(r.ci_mu[1]),
                    _cell(r.params.tau2), _cell(r.ci_tau2[0]), _cell(r.ci_tau2[1]),
                    _cell(r.loglik), _cell(r.converged),
                ]
            )


def write_perf_csv(path: str | Path, rows: list[PerfRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PERF_COLUMNS)
        for row in rows:
            writer.writerow([_cell(getattr(row, col)) for col in PERF_COLUMNS])


def write_raw_csv(path: str | Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RAW_COLUMNS)
        for row in rows:
            writer.writerow([_cell(row[col]) for col in RAW_COLUMNS])


def read_perf_csv(path: str | Path) -> list[dict]:
    """Rows of a perf.csv as dicts; raises DataError naming missing columns."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"perf file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in PERF_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        return list(reader)


def write_manifest(path: str | Path, rc: RunConfig, n_scenarios: int) -> None:
    """Run record: full config plus versions; can be reused as a config file."""
    import numpy
    import scipy

    from . import __version__

    payload = dataclasses.asdict(rc)
    payload["n_scenarios"] = n_scenarios
    payload["versions"] = {
        "orbmeta": __version__,
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
