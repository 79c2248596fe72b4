"""Faceted grids of simulation performance measures, one line per method."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd

PERF_COLUMNS = [
    "K", "mu", "i2", "gamma_dgm", "n_per_arm", "n_sim", "method", "parameter",
    "bias", "ese", "mse", "coverage", "power",
    "mcse_bias", "mcse_ese", "mcse_mse", "mcse_coverage", "mcse_power",
    "n_converged",
]

# kind -> (parameter, metric, panel keys, x axis)
GRID_KINDS = {
    "bias_grid": ("mu", "bias", ("K", "i2"), "mu"),
    "coverage_grid": ("mu", "coverage", ("K", "i2"), "mu"),
    "tau2_bias_grid": ("tau2", "bias", ("K", "mu"), "i2"),
}


def grid_frame(perf_csv: str | Path, kind: str) -> tuple[pd.DataFrame, list[tuple]]:
    """Rows feeding one grid figure plus the ordered list of panel keys."""
    if kind not in GRID_KINDS:
        raise ValueError(f"unknown grid kind {kind!r}; expected one of {sorted(GRID_KINDS)}")
    path = Path(perf_csv)
    if not path.exists():
        raise ValueError(f"perf CSV not found: {path}")
    try:
        df = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise ValueError(f"{path}: empty CSV") from None
    missing = [c for c in PERF_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
    parameter, metric, panel_keys, x_axis = GRID_KINDS[kind]
    sub = df[df["parameter"] == parameter].copy()
    if sub.empty:
        raise ValueError(f"{path}: no rows for parameter {parameter!r}")
    panels = sorted(sub.groupby(list(panel_keys)).groups.keys())
    return sub, panels


def plot_grid(perf_csv: str | Path, kind: str, out_path: str | Path) -> dict:
    """Render the panel grid; returns the frame and panel keys used."""
    sub, panels = grid_frame(perf_csv, kind)
    parameter, metric, panel_keys, x_axis = GRID_KINDS[kind]
    rows = sorted(sub[panel_keys[0]].unique())
    cols = sorted(sub[panel_keys[1]].unique())
    fig, axes = plt.subplots(
        len(rows), len(cols),
        figsize=(2.6 * len(cols) + 1.2, 2.2 * len(rows) + 1.0),
        sharex=True, sharey=True, squeeze=False,
    )
    methods = list(dict.fromkeys(sub["method"]))
    for i, rv in enumerate(rows):
        for j, cv in enumerate(cols):
            ax = axes[i][j]
            panel = sub[(sub[panel_keys[0]] == rv) & (sub[panel_keys[1]] == cv)]
            for m in methods:
                line = panel[panel["method"] == m].sort_values(x_axis)
                if not line.empty:
                    ax.plot(line[x_axis], line[metric], marker="o", ms=3,
                            lw=1.2, label=m)
            if metric == "bias":
                ax.axhline(0.0, color="grey", lw=0.7, ls="--")
            elif metric == "coverage":
                ax.axhline(0.95, color="grey", lw=0.7, ls="--")
            ax.set_title(f"{panel_keys[0]}={rv:g}, {panel_keys[1]}={cv:g}", fontsize=8)
            if i == len(rows) - 1:
                ax.set_xlabel(x_axis)
            if j == 0:
                ax.set_ylabel(f"{metric} ({parameter})")
    axes[0][0].legend(fontsize=7, frameon=False)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return {"frame": sub, "panels": panels, "metric": metric, "x_axis": x_axis}
