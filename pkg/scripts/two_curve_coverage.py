"""Edge coverage of two reweighted curves on a grid, best over a range of seeds."""

import argparse

from curveweave.mesh_graph import build_grid_graph
from curveweave.sfc import best_of_seeds, edge_coverage, sfc_total_cost


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--side", type=int, default=4)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--gamma", type=float, default=0.2)
    args = ap.parse_args()
    g = build_grid_graph(args.side, args.side)
    seed, curves = best_of_seeds(g, range(args.seeds), m=2, gamma=args.gamma)
    rep = edge_coverage(g, curves)
    print(f"best seed {seed}, costs {[sfc_total_cost(g, c) for c in curves]}")
    print(f"covered {rep.covered_edges}/{rep.total_edges}, shared {rep.shared_edges}, "
          f"uncovered {rep.uncovered_edges}")
    for k, c in enumerate(curves):
        print(f"curve {k}: {c.to_vertex.tolist()}")


if __name__ == "__main__":
    main()
