"""Tabulate Os(p) against its linearization K_Os * p / ln p."""

import argparse
import math

import numpy as np

from matmart.osekowski import default_grid, k_os, os_constant


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=12, help="rows to print")
    args = ap.parse_args()
    grid = default_grid()
    k = k_os(grid)
    print(f"K_Os on {grid.size} log-spaced points in [{grid[0]:g}, {grid[-1]:g}]: {k:.10f}")
    print(f"{'p':>10} {'Os(p)':>12} {'Os ln p / p':>12} {'K p / ln p':>12}")
    for p in np.geomspace(4, 1e4, args.points):
        print(f"{p:10.3f} {os_constant(p):12.4f} {os_constant(p) * math.log(p) / p:12.6f} "
              f"{k * p / math.log(p):12.4f}")


if __name__ == "__main__":
    main()
