"""Monte-Carlo study of ORB impact: data generation, censoring, fitting, aggregation.

Each replication simulates a random-effects meta-analysis, censors
outcomes with reporting probability exp(-4 p^gamma), and fits the
requested estimators.  Replications are deterministic given (seed,
scenario identity, replication index): every unit derives its own RNG
from a counter-based seed key, so any parallelism level produces
identical results.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace as _dc_replace
from typing import Sequence

import numpy as np

from .adjusted import fit_orb_adjusted
from .core import CIError, FitResult, MetaAnalysis, Study, fit_naive
from .selection import SelectionSpec, eval_weight, p_value, parse_spec

__all__ = [
    "ScenarioConfig",
    "PerfRow",
    "RepEstimate",
    "SimulationError",
    "i2_to_tau2",
    "replication_rng",
    "generate_meta",
    "apply_orb",
    "draw_orb_dataset",
    "run_replication",
    "aggregate",
    "run_grid",
]

MAX_ORB_ATTEMPTS = 10**6

DEFAULT_METHODS = (
    "naive",
    "complete",
    "adj:A",
    "adj:B:3",
    "adj:C:3",
    "adj:D:1.5:7",
    "adj:D:7:1.5",
    "adj:DGM",
)


class SimulationError(RuntimeError):
    pass


def i2_to_tau2(i2: float, sigma2_typical: float) -> float:
    """Heterogeneity variance implied by I^2 and a typical within variance.

    tau2 = sigma2_typical * i2 / (1 - i2).
    """
    if not 0.0 <= i2 < 1.0:
        raise ValueError(f"i2 must lie in [0, 1), got {i2}")
    if sigma2_typical <= 0:
        raise ValueError("sigma2_typical must be positive")
    return sigma2_typical * i2 / (1.0 - i2)


@dataclass(frozen=True)
class ScenarioConfig:
    """One cell of the simulation grid."""

    K: int
    mu: float
    i2: float
    gamma_dgm: float
    n_per_arm: int = 50
    n_sim: int = 1000
    seed: int = 0
    methods: tuple[str, ...] = DEFAULT_METHODS
    alpha: float = 0.05
    level: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.K < 2:
            raise ValueError("K must be at least 2")
        if self.n_sim < 2:
            raise ValueError("n_sim must be at least 2")
        if not 0.0 <= self.i2 < 1.0:
            raise ValueError("i2 must lie in [0, 1)")
        if self.gamma_dgm <= 0:
            raise ValueError("gamma_dgm must be positive")
        if self.n_per_arm < 2:
            raise ValueError("n_per_arm must be at least 2")
        for m in self.methods:
            resolve_method(m, self)  # validates descriptors eagerly

    @property
    def sigma2_typical(self) -> float:
        return 2.0 / self.n_per_arm

    @property
    def tau2(self) -> float:
        return i2_to_tau2(self.i2, self.sigma2_typical)


@dataclass(frozen=True)
class RepEstimate:
    """Per-replication, per-method estimates kept for aggregation."""

    method: str
    mu_hat: float
    tau2_hat: float
    mu_lo: float
    mu_hi: float
    tau2_lo: float
    tau2_hi: float
    converged: bool


@dataclass(frozen=True)
class PerfRow:
    """Performance measures of one method for one parameter in one scenario."""

    K: int
    mu: float
    i2: float
    gamma_dgm: float
    n_per_arm: int
    n_sim: int
    method: str
    parameter: str
    bias: float
    ese: float
    mse: float
    coverage: float
    power: float
    mcse_bias: float
    mcse_ese: float
    mcse_mse: float
    mcse_coverage: float
    mcse_power: float
    n_converged: int


def resolve_method(descriptor: str, cfg: ScenarioConfig) -> SelectionSpec | None:
    """Validate a method descriptor; returns the SelectionSpec for adjusted ones.

    ``adj:DGM`` (no gamma) resolves to the scenario's own censoring gamma.
    """
    if descriptor in ("naive", "complete"):
        return None
    if descriptor.startswith("adj:"):
        rest = descriptor[len("adj:"):]
        if rest == "DGM":
            return SelectionSpec("DGM", gamma=cfg.gamma_dgm, alpha=cfg.alpha)
        return parse_spec(rest, alpha=cfg.alpha)
    raise ValueError(f"unknown method descriptor {descriptor!r}")


def _float_bits(x: float) -> int:
    return int(np.float64(x).view(np.uint64))


def replication_rng(cfg: ScenarioConfig, rep_index: int) -> np.random.Generator:
    """Independent RNG for one (scenario, replication) unit.

    The seed key hashes (master seed, scenario identity fields, replication
    index), so streams never depend on execution order or thread count.
    """
    key = (
        int(cfg.seed) & 0xFFFFFFFFFFFFFFFF,
        cfg.K,
        _float_bits(cfg.mu),
        _float_bits(cfg.i2),
        _float_bits(cfg.gamma_dgm),
        cfg.n_per_arm,
        int(rep_index),
    )
    return np.random.default_rng(np.random.SeedSequence(key))


def generate_meta(
    cfg: ScenarioConfig, rep_index: int, rng: np.random.Generator
) -> MetaAnalysis:
    """Simulate one fully reported meta-analysis of K studies.

    True effects theta_i ~ N(mu, tau2); observed y_i ~ N(theta_i, 2/n);
    reported variances sigma_i^2 ~ chi2(2n-2) / ((n-1) n), drawn
    independently of y.
    """
    n = cfg.n_per_arm
    tau = math.sqrt(cfg.tau2)
    theta = rng.normal(cfg.mu, tau, cfg.K) if tau > 0 else np.full(cfg.K, cfg.mu)
    y = rng.normal(theta, math.sqrt(2.0 / n))
    sigma2 = rng.chisquare(2 * n - 2, cfg.K) / ((n - 1) * n)
    studies = tuple(
        Study(
            id=f"r{rep_index}s{i + 1}",
            n_treat=n,
            n_ctrl=n,
            y=float(y[i]),
            sigma=float(math.sqrt(sigma2[i])),
            reported=True,
        )
        for i in range(cfg.K)
    )
    return MetaAnalysis(studies=studies)


def apply_orb(
    ma: MetaAnalysis, gamma_dgm: float, rng: np.random.Generator
) -> MetaAnalysis:
    """Censor each study independently with reporting probability exp(-4 p^gamma).

    p is the one-sided p-value from the study's own drawn sigma.  Censored
    studies keep their arm sizes and lose (y, sigma).  The returned
    meta-analysis may have fewer than 2 reported studies; the draw loop in
    ``draw_orb_dataset`` regenerates in that case.
    """
    spec = SelectionSpec("DGM", gamma=gamma_dgm)
    y = np.array([s.y for s in ma.studies], dtype=float)
    sigma = np.array([s.sigma for s in ma.studies], dtype=float)
    p = p_value(y, sigma, "one")
    keep = rng.random(len(ma.studies)) < eval_weight(spec, p)
    studies = tuple(
        s
        if keep[i]
        else Study(id=s.id, n_treat=s.n_treat, n_ctrl=s.n_ctrl, reported=False)
        for i, s in enumerate(ma.studies)
    )
    return MetaAnalysis(studies=studies)


def draw_orb_dataset(
    cfg: ScenarioConfig, rep_index: int, rng: np.random.Generator
) -> tuple[MetaAnalysis, MetaAnalysis]:
    """Generate and censor until at least 2 studies report; returns (complete, censored).

    A failed draw regenerates the whole meta-analysis, not just the
    censoring.  Bounded at 10^6 attempts.
    """
    for _ in range(MAX_ORB_ATTEMPTS):
        complete = generate_meta(cfg, rep_index, rng)
        censored = apply_orb(complete, cfg.gamma_dgm, rng)
        if len(censored.reported) >= 2:
            return complete, censored
    raise SimulationError(
        f"no dataset with >=2 reported studies after {MAX_ORB_ATTEMPTS} attempts"
    )


_FAILED = dict(
    mu_hat=math.nan, tau2_hat=math.nan, mu_lo=math.nan, mu_hi=math.nan,
    tau2_lo=math.nan, tau2_hi=math.nan, converged=False,
)


def _to_estimate(method: str, fit: FitResult) -> RepEstimate:
    return RepEstimate(
        method=method,
        mu_hat=fit.params.mu,
        tau2_hat=fit.params.tau2,
        mu_lo=fit.ci_mu[0],
        mu_hi=fit.ci_mu[1],
        tau2_lo=fit.ci_tau2[0],
        tau2_hi=fit.ci_tau2[1],
        converged=fit.converged,
    )


def run_replication(cfg: ScenarioConfig, rep_index: int) -> list[RepEstimate]:
    """One replication: draw data, censor, fit every requested method.

    Per-method failures are recorded as non-converged estimates; the
    replication itself is never discarded.
    """
    rng = replication_rng(cfg, rep_index)
    complete, censored = draw_orb_dataset(cfg, rep_index, rng)
    out = []
    for descriptor in cfg.methods:
        try:
            if descriptor == "naive":
                fit = fit_naive(censored, level=cfg.level)
            elif descriptor == "complete":
                fit = _dc_replace(fit_naive(complete, level=cfg.level), method="complete")
            else:
                spec = resolve_method(descriptor, cfg)
                fit = fit_orb_adjusted(censored, spec, form="simplified", level=cfg.level)
            out.append(_to_estimate(descriptor, fit))
        except (CIError, ValueError, FloatingPointError, ArithmeticError):
            out.append(RepEstimate(method=descriptor, **_FAILED))
    return out


def _nan_row(cfg: ScenarioConfig, method: str, parameter: str) -> PerfRow:
    nan = math.nan
    return PerfRow(
        K=cfg.K, mu=cfg.mu, i2=cfg.i2, gamma_dgm=cfg.gamma_dgm,
        n_per_arm=cfg.n_per_arm, n_sim=cfg.n_sim, method=method,
        parameter=parameter, bias=nan, ese=nan, mse=nan, coverage=nan,
        power=nan, mcse_bias=nan, mcse_ese=nan, mcse_mse=nan,
        mcse_coverage=nan, mcse_power=nan, n_converged=0,
    )


def aggregate(
    cfg: ScenarioConfig, replications: Sequence[Sequence[RepEstimate]]
) -> list[PerfRow]:
    """Performance measures with Monte-Carlo standard errors.

    One row per (method, parameter).  Only converged fits enter the
    aggregates; power is defined for mu only (CI excludes 0).
    """
    rows = []
    for m_idx, method in enumerate(cfg.methods):
        ests = [rep[m_idx] for rep in replications if rep[m_idx].converged]
        for parameter in ("mu", "tau2"):
            if not ests:
                rows.append(_nan_row(cfg, method, parameter))
                continue
            if parameter == "mu":
                theta = cfg.mu
                hat = np.array([e.mu_hat for e in ests])
                lo = np.array([e.mu_lo for e in ests])
                hi = np.array([e.mu_hi for e in ests])
            else:
                theta = cfg.tau2
                hat = np.array([e.tau2_hat for e in ests])
                lo = np.array([e.tau2_lo for e in ests])
                hi = np.array([e.tau2_hi for e in ests])
            n = len(ests)
            err = hat - theta
            bias = float(np.mean(err))
            ese = float(np.std(hat, ddof=1)) if n > 1 else math.nan
            mse = float(np.mean(err**2))
            covered = (lo <= theta) & (theta <= hi)
            coverage = float(np.mean(covered))
            mcse_bias = ese / math.sqrt(n) if n > 1 else math.nan
            mcse_ese = ese / math.sqrt(2.0 * (n - 1)) if n > 1 else math.nan
            mcse_mse = float(np.std(err**2, ddof=1)) / math.sqrt(n) if n > 1 else math.nan
            mcse_coverage = math.sqrt(coverage * (1.0 - coverage) / n)
            if parameter == "mu":
                rejects = (lo > 0.0) | (hi < 0.0)
                power = float(np.mean(rejects))
                mcse_power = math.sqrt(power * (1.0 - power) / n)
            else:
                power = math.nan
                mcse_power = math.nan
            rows.append(
                PerfRow(
                    K=cfg.K, mu=cfg.mu, i2=cfg.i2, gamma_dgm=cfg.gamma_dgm,
                    n_per_arm=cfg.n_per_arm, n_sim=cfg.n_sim, method=method,
                    parameter=parameter, bias=bias, ese=ese, mse=mse,
                    coverage=coverage, power=power, mcse_bias=mcse_bias,
                    mcse_ese=mcse_ese, mcse_mse=mcse_mse,
                    mcse_coverage=mcse_coverage, mcse_power=mcse_power,
                    n_converged=n,
                )
            )
    return rows


def _rep_block(cfg: ScenarioConfig, rep_indices: Sequence[int]):
    return [run_replication(cfg, r) for r in rep_indices]


def _blocks(n_sim: int, block_size: int):
    return [list(range(a, min(a + block_size, n_sim))) for a in range(0, n_sim, block_size)]


def run_grid(
    grid: Sequence[ScenarioConfig],
    parallelism: int = 1,
    emit_raw: bool = False,
) -> tuple[list[PerfRow], list[dict] | None]:
    """Run every scenario and aggregate; identical output for any parallelism.

    Returns (perf_rows, raw_rows); raw_rows is None unless ``emit_raw``.
    Work units are (scenario, replication-block) pairs executed in worker
    processes; results are reassembled in deterministic order.
    """
    results: dict[int, list] = {}
    if parallelism <= 1:
        for i, cfg in enumerate(grid):
            results[i] = [run_replication(cfg, r) for r in range(cfg.n_sim)]
    else:
        block_size = 16
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            futures = {}
            for i, cfg in enumerate(grid):
                for j, block in enumerate(_blocks(cfg.n_sim, block_size)):
                    futures[(i, j)] = pool.submit(_rep_block, cfg, block)
            for i, cfg in enumerate(grid):
                reps: list = []
                for j in range(len(_blocks(cfg.n_sim, block_size))):
                    reps.extend(futures[(i, j)].result())
                results[i] = reps

    perf_rows: list[PerfRow] = []
    raw_rows: list[dict] | None = [] if emit_raw else None
    for i, cfg in enumerate(grid):
        reps = results[i]
        perf_rows.extend(aggregate(cfg, reps))
        if emit_raw:
            for r, per_method in enumerate(reps):
                for est in per_method:
                    raw_rows.append(
                        dict(
                            K=cfg.K, mu=cfg.mu, i2=cfg.i2,
                            gamma_dgm=cfg.gamma_dgm, n_per_arm=cfg.n_per_arm,
                            rep=r, method=est.method, mu_hat=est.mu_hat,
                            tau2_hat=est.tau2_hat, mu_lo=est.mu_lo,
                            mu_hi=est.mu_hi, tau2_lo=est.tau2_lo,
                            tau2_hi=est.tau2_hi, converged=int(est.converged),
                        )
                    )
    return perf_rows, raw_rows
