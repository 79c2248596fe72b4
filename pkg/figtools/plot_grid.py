#!/usr/bin/env python3
"""Render a faceted performance grid from a perf.csv.

Usage: plot_grid.py <perf.csv> <bias_grid|coverage_grid|tau2_bias_grid> <out.svg|png>
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent / "src"))

from figtools.grids import plot_grid


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 3:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    try:
        result = plot_grid(argv[0], argv[1], argv[2])
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {argv[2]} ({len(result['panels'])} panels)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
