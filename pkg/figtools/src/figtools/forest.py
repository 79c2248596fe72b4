"""Forest plot of naive and ORB-adjusted estimates on the risk-ratio scale."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

ADJUST_COLUMNS = [
    "method", "mu_hat", "mu_lo", "mu_hi",
    "tau2_hat", "tau2_lo", "tau2_hi", "loglik", "converged",
]


def forest_frame(adjust_csv: str | Path) -> pd.DataFrame:
    """Plotting data for a forest plot: one row per method, RR scale.

    Raises ValueError on a missing/empty file or a schema mismatch.
    """
    path = Path(adjust_csv)
    if not path.exists():
        raise ValueError(f"adjust CSV not found: {path}")
    try:
        df = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise ValueError(f"{path}: empty CSV") from None
    missing = [c for c in ADJUST_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
    if df.empty:
        raise ValueError(f"{path}: no result rows")
    out = df[["method", "mu_hat", "mu_lo", "mu_hi"]].copy()
    for col in ("mu_hat", "mu_lo", "mu_hi"):
        out["rr" + col.removeprefix("mu")] = np.exp(out[col])
    return out


def plot_forest(adjust_csv: str | Path, out_path: str | Path) -> pd.DataFrame:
    """Render one point+interval per method and return the plotted frame."""
    frame = forest_frame(adjust_csv)
    n = len(frame)
    fig, ax = plt.subplots(figsize=(7, 0.6 * n + 1.6))
    ys = np.arange(n)[::-1]
    for y, row in zip(ys, frame.itertuples()):
        color = "tab:red" if row.method == "naive" else "tab:blue"
        ax.plot([row.rr_lo, row.rr_hi], [y, y], color=color, lw=1.6)
        ax.plot([row.rr_hat], [y], "o", color=color, ms=6)
    ax.axvline(1.0, color="grey", lw=0.8, ls="--")
    ax.set_yticks(ys)
    ax.set_yticklabels(frame["method"])
    ax.set_xscale("log")
    ax.set_xlabel("risk ratio (95% profile-likelihood CI)")
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return frame
