"""ORB-adjusted log-likelihood: unreported-study contributions and joint ML fit.

Reported studies contribute normal log-densities; each unreported study
contributes log of the integral of the density times (1 - w), where w is
the assumed selection function.  A generic variant additionally divides
each reported contribution by the integral of density times w.

Integrals are Gauss-Legendre quadrature over mu +/- 10 sd, with panels
split at the weight function's breakpoints; for the step selection
function the closed-form normal-CDF expressions are used instead.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import log_ndtr, ndtri

from .core import FitResult, MetaAnalysis, Params, _normal_loglik, fit_ml
from .selection import SelectionSpec, eval_weight, p_value, weight_breakpoints

__all__ = [
    "AdjustedModel",
    "impute_missing_variance",
    "unreported_term",
    "reported_weight_term",
    "orb_adjusted_loglik",
    "fit_orb_adjusted",
]

_QUAD_NODES, _QUAD_WEIGHTS = np.polynomial.legendre.leggauss(128)
_WINDOW_SDS = 10.0  # integration window half-width; tail mass < 1e-22


@dataclass(frozen=True)
class AdjustedModel:
    """Inputs of the ORB-adjusted likelihood.

    ``reported`` holds (y, sigma) pairs; ``unreported`` holds one imputed
    variance per unreported study.  With ``form="simplified"`` reported
    studies carry no selection weight; ``"generic"`` subtracts the
    reported-weight normalization as well.
    """

    reported: tuple[tuple[float, float], ...]
    unreported: tuple[float, ...]
    spec: SelectionSpec
    form: str = "simplified"

    def __post_init__(self):
        object.__setattr__(self, "reported", tuple(tuple(p) for p in self.reported))
        object.__setattr__(self, "unreported", tuple(self.unreported))
        if any(s2 <= 0 for s2 in self.unreported):
            raise ValueError("imputed variances must be positive")
        if any(sig <= 0 for _, sig in self.reported):
            raise ValueError("reported sigmas must be positive")
        if self.form not in ("simplified", "generic"):
            raise ValueError(f"form must be 'simplified' or 'generic', got {self.form!r}")


def impute_missing_variance(
    reported: Sequence[tuple[float, float]], n_unrep: int
) -> float:
    """Impute the variance of an unreported study from reported precisions.

    Uses the precision-per-participant rate of the reported studies,
    k = sum(sigma_i^-2) / sum(n_i), and returns 1 / (k * n_unrep).

    Parameters
    ----------
    reported : sequence of (sigma, n_total) pairs for reported studies
    n_unrep : total sample size of the unreported study
    """
    if len(reported) == 0:
        raise ValueError("imputation requires at least one reported study")
    if n_unrep <= 0:
        raise ValueError("n_unrep must be positive")
    inv_var = sum(1.0 / (sig * sig) for sig, _ in reported)
    n_sum = sum(n for _, n in reported)
    if min(sig for sig, _ in reported) <= 0 or min(n for _, n in reported) <= 0:
        raise ValueError("reported sigmas and sample sizes must be positive")
    k_hat = inv_var / n_sum
    return 1.0 / (k_hat * n_unrep)


def _log_phi_interval(a: float, b: float) -> float:
    """log(Phi(b) - Phi(a)) for a < b, computed in log space."""
    la, lb = log_ndtr(a), log_ndtr(b)
    diff = -math.expm1(la - lb)  # 1 - Phi(a)/Phi(b)
    if diff <= 0.0:
        return -math.inf
    return lb + math.log(diff)


def _closed_form_step(mu, tau2, sigma, alpha, p_side, complement) -> float:
    """Log integral of N(mu, sigma^2 + tau2) against the step weight (or 1-w)."""
    s = math.sqrt(sigma * sigma + tau2)
    if p_side == "one":
        # p <= alpha iff y >= sigma * z_{1-alpha}
        cut = sigma * float(ndtri(1.0 - alpha))
        z = (cut - mu) / s
        return float(log_ndtr(z)) if complement else float(log_ndtr(-z))
    # two-sided: p <= alpha iff |y| >= sigma * z_{1-alpha/2}
    cut = sigma * float(ndtri(1.0 - alpha / 2.0))
    lo, hi = (-cut - mu) / s, (cut - mu) / s
    if complement:
        return _log_phi_interval(lo, hi)
    return float(np.logaddexp(log_ndtr(lo), log_ndtr(-hi)))


def _quad_log_integral(mu, tau2, sigma, spec, complement) -> float:
    """Log integral of N(mu, sigma^2 + tau2) times w (or 1-w) by quadrature.

    Gauss-Legendre with 128 nodes per panel; panels split at the weight's
    breakpoints so each piece is smooth.
    """
    s = math.sqrt(sigma * sigma + tau2)
    lo, hi = mu - _WINDOW_SDS * s, mu + _WINDOW_SDS * s
    edges = [lo]
    edges.extend(b for b in weight_breakpoints(spec, sigma) if lo < b < hi)
    edges.append(hi)
    edges = np.asarray(edges)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    y = (mid[:, None] + half[:, None] * _QUAD_NODES[None, :]).ravel()
    gl_w = (half[:, None] * _QUAD_WEIGHTS[None, :]).ravel()
    w = eval_weight(spec, p_value(y, sigma, spec.p_side))
    if complement:
        w = 1.0 - w
    density = np.exp(-0.5 * ((y - mu) / s) ** 2) / (s * math.sqrt(2.0 * math.pi))
    integral = float(np.dot(gl_w, density * w))
    if integral <= 0.0:
        return -math.inf
    return math.log(min(integral, 1.0))


def _term(mu, tau2, sigma, spec, complement) -> float:
    if spec.kind == "A":
        return _closed_form_step(mu, tau2, sigma, spec.alpha, spec.p_side, complement)
    return _quad_log_integral(mu, tau2, sigma, spec, complement)


def unreported_term(params: Params, sigma2: float, spec: SelectionSpec) -> float:
    """Log-likelihood contribution of one unreported study.

    log of the integral of N(mu, sigma2 + tau2) times (1 - w(y)); returns
    -inf when the integral vanishes numerically.
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    return _term(params.mu, params.tau2, math.sqrt(sigma2), spec, complement=True)


def reported_weight_term(params: Params, sigma: float, spec: SelectionSpec) -> float:
    """Log of the reported-study normalization integral of density times w."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return _term(params.mu, params.tau2, sigma, spec, complement=False)


def _adjusted_loglik(mu, tau2, y, s2, unrep_groups, rep_groups, spec) -> float:
    ll = _normal_loglik(mu, tau2, y, s2)
    for sigma2, count in unrep_groups:
        term = _term(mu, tau2, math.sqrt(sigma2), spec, complement=True)
        if term == -math.inf:
            return -math.inf
        ll += count * term
    for sigma, count in rep_groups:
        term = _term(mu, tau2, sigma, spec, complement=False)
        if term == -math.inf:
            return -math.inf
        ll -= count * term
    return ll


def _groups(values) -> tuple[tuple[float, int], ...]:
    # identical variances share one quadrature; relevant when all n are equal
    return tuple(sorted(Counter(values).items()))


def orb_adjusted_loglik(params: Params, model: AdjustedModel) -> float:
    """ORB-adjusted log-likelihood at the given parameters.

    Simplified form: reported normal terms plus one unreported term per
    missing study.  Generic form additionally subtracts the log of the
    reported-weight integral for every reported study.
    """
    y = np.array([p[0] for p in model.reported], dtype=float)
    s2 = np.array([p[1] for p in model.reported], dtype=float) ** 2
    unrep = _groups(model.unreported)
    rep = _groups(sig for _, sig in model.reported) if model.form == "generic" else ()
    return _adjusted_loglik(params.mu, params.tau2, y, s2, unrep, rep, model.spec)


def build_adjusted_model(
    ma: MetaAnalysis, spec: SelectionSpec, form: str = "simplified"
) -> AdjustedModel:
    """Assemble the adjusted-likelihood inputs, imputing missing variances."""
    reported = tuple((s.y, s.sigma) for s in ma.reported)
    pairs = tuple((s.sigma, s.n_total) for s in ma.reported)
    unreported = tuple(
        impute_missing_variance(pairs, s.n_total) for s in ma.unreported
    )
    return AdjustedModel(reported=reported, unreported=unreported, spec=spec, form=form)


def fit_orb_adjusted(
    ma: MetaAnalysis,
    spec: SelectionSpec,
    form: str = "simplified",
    level: float = 0.95,
) -> FitResult:
    """Joint ML fit of (mu, tau2) under the ORB-adjusted likelihood.

    Missing variances are imputed from the reported studies' precisions
    and total sample sizes.  Profile-likelihood CIs for both parameters.
    """
    if len(ma.reported) < 2:
        raise ValueError("at least 2 reported studies are required for a fit")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    model = build_adjusted_model(ma, spec, form)
    y = np.array([p[0] for p in model.reported], dtype=float)
    s2 = np.array([p[1] for p in model.reported], dtype=float) ** 2
    unrep = _groups(model.unreported)
    rep = _groups(sig for _, sig in model.reported) if form == "generic" else ()

    def loglik(mu, tau2):
        return _adjusted_loglik(mu, tau2, y, s2, unrep, rep, spec)

    result = fit_ml(loglik, y, s2, method=f"adj:{spec.label()}", level=level)
    return result
