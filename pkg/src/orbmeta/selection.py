"""Selection (weight) functions mapping a study's p-value to a reporting probability.

Five families are supported, each non-increasing in p:

    A        step: report iff significant
    B(beta)  1 below alpha, power-law decay above
    C(gamma) power-law rise to 1 as p -> 0 below alpha, 0 above
    D(beta, gamma, omega_alpha)  blend of B and C meeting at omega_alpha
    DGM(gamma)  exp(-4 p^gamma), the censoring law used in simulation

p-values are one-sided by default (beneficial direction); two-sided is
available via ``p_side``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.special import ndtr, ndtri

__all__ = [
    "SelectionSpec",
    "parse_spec",
    "p_value",
    "eval_weight",
    "weight_as_function_of_y",
    "weight_breakpoints",
]

DGM_RATE = 4.0  # fixed scale constant of the exp(-4 p^gamma) censoring law

_KINDS = ("A", "B", "C", "D", "DGM")


@dataclass(frozen=True)
class SelectionSpec:
    """A tagged weight-function choice with its parameters.

    ``alpha`` is the significance threshold and ``p_side`` selects one- or
    two-sided p-values.  ``omega_alpha`` is the reporting probability at
    p = alpha for kind D.
    """

    kind: str
    beta: float | None = None
    gamma: float | None = None
    omega_alpha: float = 0.5
    alpha: float = 0.05
    p_side: str = "one"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown selection kind {self.kind!r}")
        if self.kind in ("B", "D") and (self.beta is None or self.beta <= 0):
            raise ValueError(f"kind {self.kind} requires beta > 0")
        if self.kind in ("C", "D", "DGM") and (self.gamma is None or self.gamma <= 0):
            raise ValueError(f"kind {self.kind} requires gamma > 0")
        if not 0.0 <= self.omega_alpha <= 1.0:
            raise ValueError("omega_alpha must lie in [0, 1]")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.p_side not in ("one", "two"):
            raise ValueError(f"p_side must be 'one' or 'two', got {self.p_side!r}")

    def label(self) -> str:
        """Text encoding, e.g. ``B:3``, ``D:1.5:7`` (beta:gamma), ``A@two``."""
        if self.kind == "A":
            base = "A"
        elif self.kind == "B":
            base = f"B:{self.beta:g}"
        elif self.kind == "C":
            base = f"C:{self.gamma:g}"
        elif self.kind == "D":
            base = f"D:{self.beta:g}:{self.gamma:g}"
        else:
            base = f"DGM:{self.gamma:g}"
        return base + ("@two" if self.p_side == "two" else "")


def parse_spec(text: str, alpha: float = 0.05) -> SelectionSpec:
    """Parse a text encoding such as ``A``, ``B:3``, ``D:1.5:7`` or ``DGM:1.5``.

    A ``@two`` suffix selects two-sided p-values; default is one-sided.
    For kind D the parameter order is beta:gamma.
    """
    token = text.strip()
    p_side = "one"
    if token.endswith("@two"):
        p_side = "two"
        token = token[: -len("@two")]
    elif token.endswith("@one"):
        token = token[: -len("@one")]
    parts = token.split(":")
    kind = parts[0]
    try:
        if kind == "A":
            if len(parts) != 1:
                raise ValueError
            return SelectionSpec("A", alpha=alpha, p_side=p_side)
        if kind == "B":
            (beta,) = map(float, parts[1:])
            return SelectionSpec("B", beta=beta, alpha=alpha, p_side=p_side)
        if kind == "C":
            (gamma,) = map(float, parts[1:])
            return SelectionSpec("C", gamma=gamma, alpha=alpha, p_side=p_side)
        if kind == "D":
            beta, gamma = map(float, parts[1:])
            return SelectionSpec("D", beta=beta, gamma=gamma, alpha=alpha, p_side=p_side)
        if kind == "DGM":
            (gamma,) = map(float, parts[1:])
            return SelectionSpec("DGM", gamma=gamma, alpha=alpha, p_side=p_side)
    except (ValueError, TypeError):
        pass
    raise ValueError(f"cannot parse selection spec {text!r}")


def p_value(y, sigma, side: str = "one"):
    """p-value of an observed effect: one-sided Phi(-y/sigma) or two-sided.

    Accepts scalars or arrays; sigma must be positive.
    """
    if np.any(np.asarray(sigma) <= 0):
        raise ValueError("sigma must be positive")
    z = np.asarray(y, dtype=float) / np.asarray(sigma, dtype=float)
    if side == "one":
        p = ndtr(-z)
    elif side == "two":
        p = 2.0 * ndtr(-np.abs(z))
    else:
        raise ValueError(f"side must be 'one' or 'two', got {side!r}")
    if np.isscalar(y) and np.isscalar(sigma):
        return float(p)
    return p


def eval_weight(spec: SelectionSpec, p):
    """Reporting probability w(p) in [0, 1] for p in [0, 1].

    Vectorized over ``p``; returns a scalar for scalar input.
    """
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr < 0) or np.any(p_arr > 1):
        raise ValueError("p must lie in [0, 1]")
    a = spec.alpha
    if spec.kind == "DGM":
        w = np.exp(-DGM_RATE * p_arr**spec.gamma)
    else:
        w = np.empty_like(p_arr)
        sig = p_arr <= a
        if spec.kind == "A":
            w[sig] = 1.0
            w[~sig] = 0.0
        elif spec.kind == "B":
            w[sig] = 1.0
            w[~sig] = (p_arr[~sig] / a) ** (-spec.beta)
        elif spec.kind == "C":
            w[sig] = 1.0 - (p_arr[sig] / a) ** spec.gamma
            w[~sig] = 0.0
        else:  # D
            om = spec.omega_alpha
            w[sig] = 1.0 - (1.0 - om) * (p_arr[sig] / a) ** spec.gamma
            w[~sig] = om * (p_arr[~sig] / a) ** (-spec.beta)
    if np.isscalar(p):
        return float(w)
    return w


def weight_as_function_of_y(spec: SelectionSpec, sigma: float) -> Callable:
    """Compose w with the p-value map: y -> w(p(y, sigma))."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")

    def weight(y):
        return eval_weight(spec, p_value(y, sigma, spec.p_side))

    return weight


def weight_breakpoints(spec: SelectionSpec, sigma: float) -> tuple[float, ...]:
    """y-values where w(p(y, sigma)) is non-smooth (piece boundaries).

    The DGM weight is smooth everywhere and has none.  One-sided pieces
    meet at y = sigma * z_{1-alpha}; two-sided at +/- sigma * z_{1-alpha/2}.
    """
    if spec.kind == "DGM":
        return ()
    if spec.p_side == "one":
        return (sigma * float(ndtri(1.0 - spec.alpha)),)
    z = sigma * float(ndtri(1.0 - spec.alpha / 2.0))
    return (-z, z)


def with_alpha(spec: SelectionSpec, alpha: float) -> SelectionSpec:
    """Copy of the spec with a different significance threshold."""
    return replace(spec, alpha=alpha)
