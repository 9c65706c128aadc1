"""Hop cost of the Hilbert curve and of nested-bisection curves on square grids."""

import argparse

import numpy as np

from curveweave.hilbert import hilbert_ordering
from curveweave.mesh_graph import build_grid_graph
from curveweave.sfc import build_sfc, sfc_total_cost


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, nargs="+", default=[3, 4])
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()
    print("side,hilbert,best_bisection,costs")
    for level in args.levels:
        side = 1 << level
        g = build_grid_graph(side, side)
        costs = [sfc_total_cost(g, build_sfc(g, np.random.default_rng(s))) for s in range(args.seeds)]
        print(f"{side},{sfc_total_cost(g, hilbert_ordering(level))},{min(costs)},{' '.join(map(str, costs))}")


if __name__ == "__main__":
    main()
