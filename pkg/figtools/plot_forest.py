#!/usr/bin/env python3
"""Render a forest plot from an adjust-results CSV.

Usage: plot_forest.py <adjust.csv> <out.svg|png>
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent / "src"))

from figtools.forest import plot_forest


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    try:
        frame = plot_forest(argv[0], argv[1])
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {argv[1]} ({len(frame)} intervals)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
