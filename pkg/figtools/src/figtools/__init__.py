"""Render orbmeta result CSVs into static figures.

Everything here draws from CSV files only; no statistics are recomputed.
"""

from .forest import forest_frame, plot_forest
from .grids import GRID_KINDS, grid_frame, plot_grid

__version__ = "0.1.0"

__all__ = [
    "GRID_KINDS",
    "forest_frame",
    "grid_frame",
    "plot_forest",
    "plot_grid",
]
