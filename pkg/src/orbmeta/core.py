"""Study-level data model and the unadjusted random-effects likelihood.

Implements the normal-normal random effects model

    y_i ~ N(theta_i, sigma_i^2),   theta_i ~ N(mu, tau^2),

with ML estimation of (mu, tau^2) and profile-likelihood confidence
intervals.  Log risk ratios are built from 2x2 count data with a
Haldane-Anscombe continuity correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize
from scipy.stats import chi2

__all__ = [
    "Study",
    "MetaAnalysis",
    "Params",
    "FitResult",
    "CIError",
    "log_rr_from_counts",
    "naive_loglik",
    "fit_naive",
    "profile_ci",
]

LOG_2PI = math.log(2.0 * math.pi)


class CIError(RuntimeError):
    """Raised when a profile-likelihood bound cannot be bracketed."""


@dataclass(frozen=True)
class Study:
    """One trial: arm sizes, optional 2x2 counts, optional (effect, SE).

    A reported study carries the observed effect ``y`` (log risk ratio or
    any normal effect) and its standard error ``sigma``.  An unreported
    study has neither, but its arm sizes are still known.
    """

    id: str
    n_treat: int
    n_ctrl: int
    events_treat: int | None = None
    events_ctrl: int | None = None
    y: float | None = None
    sigma: float | None = None
    reported: bool = True

    def __post_init__(self):
        if self.n_treat <= 0 or self.n_ctrl <= 0:
            raise ValueError(f"study {self.id!r}: arm sizes must be positive")
        for events, n, arm in (
            (self.events_treat, self.n_treat, "treatment"),
            (self.events_ctrl, self.n_ctrl, "control"),
        ):
            if events is not None and not 0 <= events <= n:
                raise ValueError(
                    f"study {self.id!r}: {arm} events must lie in [0, {n}], got {events}"
                )
        if self.reported:
            if self.y is None or self.sigma is None:
                raise ValueError(f"study {self.id!r}: reported study requires y and sigma")
            if self.sigma <= 0:
                raise ValueError(f"study {self.id!r}: sigma must be positive")
        else:
            if self.y is not None or self.sigma is not None:
                raise ValueError(f"study {self.id!r}: unreported study cannot carry y or sigma")

    @property
    def n_total(self) -> int:
        return self.n_treat + self.n_ctrl


@dataclass(frozen=True)
class MetaAnalysis:
    """An ordered collection of studies on a single beneficial outcome."""

    studies: tuple[Study, ...]
    outcome_direction: str = "beneficial"

    def __post_init__(self):
        object.__setattr__(self, "studies", tuple(self.studies))
        if self.outcome_direction != "beneficial":
            raise NotImplementedError("only beneficial outcomes are supported")

    @property
    def reported(self) -> tuple[Study, ...]:
        return tuple(s for s in self.studies if s.reported)

    @property
    def unreported(self) -> tuple[Study, ...]:
        return tuple(s for s in self.studies if not s.reported)


@dataclass(frozen=True)
class Params:
    """Model parameters: pooled effect mu and heterogeneity variance tau2."""

    mu: float
    tau2: float

    def __post_init__(self):
        if self.tau2 < 0:
            raise ValueError(f"tau2 must be non-negative, got {self.tau2}")


@dataclass(frozen=True)
class FitResult:
    params: Params
    ci_mu: tuple[float, float]
    ci_tau2: tuple[float, float]
    loglik: float
    converged: bool
    method: str


def log_rr_from_counts(
    events_treat: float,
    n_treat: float,
    events_ctrl: float,
    n_ctrl: float,
) -> tuple[float, float]:
    """Log risk ratio and its standard error from a 2x2 table.

    If any cell of the table (events or non-events in either arm) is zero,
    0.5 is added to all four cells before computing, so each arm total
    grows by 1 (Haldane-Anscombe correction).

    Parameters
    ----------
    events_treat, n_treat : counts in the treatment arm
    events_ctrl, n_ctrl : counts in the control arm

    Returns
    -------
    (y, sigma) : log risk ratio and its standard error
    """
    a, c = float(events_treat), float(events_ctrl)
    n1, n2 = float(n_treat), float(n_ctrl)
    if not (0 <= a <= n1) or not (0 <= c <= n2):
        raise ValueError("event counts must lie in [0, n] for each arm")
    if min(a, n1 - a, c, n2 - c) == 0:
        a += 0.5
        c += 0.5
        n1 += 1.0
        n2 += 1.0
    y = math.log((a / n1) / (c / n2))
    sigma = math.sqrt(1.0 / a - 1.0 / n1 + 1.0 / c - 1.0 / n2)
    return y, sigma


def _normal_loglik(mu: float, tau2: float, y: np.ndarray, s2: np.ndarray) -> float:
    """Sum of N(mu, s2 + tau2) log densities, constants included."""
    v = s2 + tau2
    return -0.5 * float(np.sum(LOG_2PI + np.log(v) + (y - mu) ** 2 / v))


def naive_loglik(params: Params, studies: Sequence[Study]) -> float:
    """Random-effects log-likelihood of the reported studies only.

    Includes the -(K/2)log(2*pi) constant so values are comparable across
    likelihood variants.
    """
    if len(studies) < 1:
        raise ValueError("naive_loglik requires at least one study")
    if any(not s.reported for s in studies):
        raise ValueError("naive_loglik accepts reported studies only")
    y = np.array([s.y for s in studies], dtype=float)
    s2 = np.array([s.sigma for s in studies], dtype=float) ** 2
    return _normal_loglik(params.mu, params.tau2, y, s2)


def _start_values(y: np.ndarray, s2: np.ndarray) -> tuple[float, float]:
    """Precision-weighted mean and DerSimonian-Laird tau2 (clamped at 0)."""
    w = 1.0 / s2
    mu0 = float(np.sum(w * y) / np.sum(w))
    q = float(np.sum(w * (y - mu0) ** 2))
    c = float(np.sum(w) - np.sum(w**2) / np.sum(w))
    k = len(y)
    tau2_dl = max(0.0, (q - (k - 1)) / c) if c > 0 else 0.0
    return mu0, tau2_dl


_SENTINEL = -1e300  # stands in for -inf inside the unconstrained optimizer


def _maximize_loglik(
    loglik: Callable[[float, float], float],
    mu0: float,
    tau0: float,
    scale: float,
) -> tuple[float, float, float, bool]:
    """Nelder-Mead over (mu, t) with tau = |t|, plus two perturbed restarts.

    Returns (mu_hat, tau2_hat, loglik_max, converged).
    """

    def objective(x):
        val = loglik(x[0], x[1] * x[1])
        if not np.isfinite(val):
            return -_SENTINEL
        return -val

    opts = dict(xatol=1e-9, fatol=1e-8, maxiter=4000, maxfev=4000)
    best = optimize.minimize(objective, [mu0, tau0], method="Nelder-Mead", options=opts)
    converged = bool(best.success)
    for nudge in ((0.5 * scale, 0.5 * scale), (-0.5 * scale, -0.5 * scale)):
        x0 = [best.x[0] + nudge[0], abs(best.x[1]) + nudge[1]]
        res = optimize.minimize(objective, x0, method="Nelder-Mead", options=opts)
        if res.fun < best.fun:
            best = res
            converged = bool(res.success)
    mu_hat = float(best.x[0])
    tau2_hat = float(best.x[1] * best.x[1])
    return mu_hat, tau2_hat, -float(best.fun), bool(converged and np.isfinite(best.fun))


def _profile_value(
    loglik: Callable[[float, float], float],
    target: str,
    value: float,
    fit: Params,
    mu_scale: float,
) -> float:
    """Profile log-likelihood: maximize over the non-target parameter."""

    if target == "mu":
        # inner maximization over tau2 >= 0 on a bounded interval
        def neg(tau2):
            val = loglik(value, tau2)
            return -val if np.isfinite(val) else -_SENTINEL

        hi = 4.0 * (fit.tau2 + mu_scale**2 + (value - fit.mu) ** 2) + 1.0
        res = optimize.minimize_scalar(neg, bounds=(0.0, hi), method="bounded",
                                       options=dict(xatol=1e-10))
        return -float(res.fun)

    # target == "tau2": inner maximization over mu, unconstrained
    def neg(mu):
        val = loglik(mu, value)
        return -val if np.isfinite(val) else -_SENTINEL

    try:
        res = optimize.minimize_scalar(neg, bracket=(fit.mu - mu_scale, fit.mu + mu_scale))
        if not np.isfinite(res.fun):
            raise RuntimeError
    except (RuntimeError, OverflowError, ValueError):
        res = optimize.minimize_scalar(
            neg, bounds=(fit.mu - 200 * mu_scale, fit.mu + 200 * mu_scale),
            method="bounded", options=dict(xatol=1e-10),
        )
    return -float(res.fun)


def profile_ci(
    loglik: Callable[[float, float], float],
    target: str,
    level: float,
    fit: Params,
    mu_scale: float = 0.5,
) -> tuple[float, float]:
    """Profile-likelihood confidence interval for ``mu`` or ``tau2``.

    The bounds are the target values where the profile log-likelihood drops
    by chi2(1, level)/2 below its maximum.  Brackets grow by doubling away
    from the point estimate; roots are then located to 1e-8.  The tau2
    lower bound is truncated at 0 when the drop is not reached on
    [0, tau2_hat].

    Parameters
    ----------
    loglik : callable (mu, tau2) -> float
        Joint log-likelihood; ``fit`` must be its global maximum.
    target : "mu" or "tau2"
    level : confidence level in (0, 1)
    fit : the ML estimate
    mu_scale : typical scale of mu used to seed bracket expansion

    Returns
    -------
    (lower, upper)
    """
    if target not in ("mu", "tau2"):
        raise ValueError(f"unknown target {target!r}")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")

    drop = chi2.ppf(level, 1) / 2.0
    theta_hat = fit.mu if target == "mu" else fit.tau2
    ll_max = max(
        loglik(fit.mu, fit.tau2),
        _profile_value(loglik, target, theta_hat, fit, mu_scale),
    )
    threshold = ll_max - drop

    def g(value):
        return _profile_value(loglik, target, value, fit, mu_scale) - threshold

    step0 = mu_scale if target == "mu" else max(fit.tau2, mu_scale**2, 1e-4)

    def expand(direction: int) -> float:
        step = step0
        for _ in range(60):
            candidate = theta_hat + direction * step
            if target == "tau2" and candidate < 0.0:
                candidate = 0.0
            if g(candidate) < 0.0:
                return candidate
            if candidate == 0.0:
                break
            step *= 2.0
        horizon = theta_hat + direction * step
        raise CIError(
            f"{target} {'upper' if direction > 0 else 'lower'} CI bound not "
            f"bracketed within search horizon {horizon:g}"
        )

    # lower bound
    if target == "tau2" and g(0.0) >= 0.0:
        lower = 0.0
    else:
        lo = expand(-1)
        lower = float(optimize.brentq(g, lo, theta_hat, xtol=1e-8))
    # upper bound
    hi = expand(+1)
    upper = float(optimize.brentq(g, theta_hat, hi, xtol=1e-8))
    return lower, upper


def fit_ml(
    loglik: Callable[[float, float], float],
    y: np.ndarray,
    s2: np.ndarray,
    method: str,
    level: float,
) -> FitResult:
    """Shared ML machinery: joint fit of (mu, tau2) plus profile CIs."""
    mu0, tau2_dl = _start_values(y, s2)
    pooled_se = math.sqrt(1.0 / float(np.sum(1.0 / s2)))
    scale = max(pooled_se, float(np.std(y)), 0.05)
    mu_hat, tau2_hat, ll, converged = _maximize_loglik(
        loglik, mu0, math.sqrt(tau2_dl), scale
    )
    params = Params(mu_hat, tau2_hat)
    mu_scale = max(pooled_se, math.sqrt(tau2_hat / len(y)) if tau2_hat > 0 else 0.0, 0.05)
    ci_mu = profile_ci(loglik, "mu", level, params, mu_scale)
    ci_tau2 = profile_ci(loglik, "tau2", level, params, mu_scale)
    return FitResult(
        params=params,
        ci_mu=ci_mu,
        ci_tau2=ci_tau2,
        loglik=ll,
        converged=converged,
        method=method,
    )


def fit_naive(ma: MetaAnalysis, level: float = 0.95) -> FitResult:
    """ML fit of the random-effects model on the reported studies only."""
    reported = ma.reported
    if len(reported) < 2:
        raise ValueError("at least 2 reported studies are required for a fit")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    y = np.array([s.y for s in reported], dtype=float)
    s2 = np.array([s.sigma for s in reported], dtype=float) ** 2

    def loglik(mu, tau2):
        return _normal_loglik(mu, tau2, y, s2)

    return fit_ml(loglik, y, s2, method="naive", level=level)
