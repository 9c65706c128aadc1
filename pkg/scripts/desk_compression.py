"""Train an autoencoder preset on the desk square-wave set and compare with the SVD.

Prints per-25-epoch losses, then the final validation MSE next to the rank-k
SVD truncation MSE for k equal to the latent size.
"""

import argparse
import time

import numpy as np

from curveweave.autoencoder import PRESETS, TrainConfig, build_preset, train
from curveweave.autoencoder.presets import orderings_needed
from curveweave.datagen import AdvectionConfig, generate_square_wave, normalize, split
from curveweave.mesh_graph import build_grid_graph
from curveweave.sfc import build_multiple_sfcs
from curveweave.svd_baseline import snapshot_matrix, svd, truncation_mse


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", choices=PRESETS, default="sfc2-nn")
    ap.add_argument("--latent", type=int, default=16)
    ap.add_argument("--epochs", type=int, default=500)
    ap.add_argument("--lr", type=float, default=1e-4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    snap = split(normalize(generate_square_wave(AdvectionConfig.desk(args.seed))),
                 rng=np.random.default_rng(args.seed))
    g = build_grid_graph(32, 32)
    need = orderings_needed(args.preset)
    curves = build_multiple_sfcs(g, need, np.random.default_rng(args.seed)) if need else []
    res = svd(snapshot_matrix(snap.values))
    ref = truncation_mse(res, args.latent, snap.n_nodes, snap.n_examples)

    model = build_preset(args.preset, snap.n_nodes, curves, latent=args.latent,
                         rng=np.random.default_rng(args.seed))
    t = time.perf_counter()

    def progress(epoch, tr, va):
        if epoch % 25 == 0:
            print(f"epoch {epoch:4d} train {tr:.3e} val {va:.3e} ({time.perf_counter() - t:.0f}s)", flush=True)

    rep = train(model, snap, TrainConfig(epochs=args.epochs, lr=args.lr, seed=args.seed), progress=progress)
    if rep.val_mse:
        print(f"val {rep.val_mse[-1]:.3e}, SVD rank {args.latent} {ref:.3e}, ratio {rep.val_mse[-1] / ref:.3f}")


if __name__ == "__main__":
    main()
