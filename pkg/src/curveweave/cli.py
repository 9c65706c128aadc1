"""Command line pipeline: graphs, curves, data, training, SVD and comparisons.

Every command that writes files also writes a JSON manifest beside them:
``<dir>/manifest.json`` for training runs, ``<prefix>.manifest.json`` for
curve sets and ``<file>.manifest.json`` for everything else. Exit codes: 0 success, 1 runtime or data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .autoencoder import (PRESETS, TrainConfig, build_preset, evaluate, load_checkpoint,
                          reconstruct, save_checkpoint, save_loss_csv, train)
from .autoencoder.presets import orderings_needed
from .datagen import (AdvectionConfig, GaussianConfig, generate_gaussians, generate_square_wave,
                      load_snapshots, normalize, save_snapshots, split)
from .errors import DisconnectedGraph, InvalidArgument, MeshParseError, ShapeMismatch, Unreachable
from .hilbert import hilbert_ordering, rotate_ordering
from .mesh_graph import build_graph, build_grid_graph, load_graph, load_mesh, save_graph
from .sfc import (best_of_seeds, edge_coverage, format_coverage_csv, load_ordering,
                  save_ordering, sfc_total_cost)
from .svd_baseline import format_rank_csv, load_rank_csv, snapshot_matrix, svd, truncation_mse

RUNTIME_ERRORS = (InvalidArgument, MeshParseError, ShapeMismatch, DisconnectedGraph, Unreachable,
                  FloatingPointError, OSError, ValueError)


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config: dict
    seed: int | None
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    wall_clock_s: float = 0.0
    versions: dict = field(default_factory=dict)


def _versions() -> dict:
    import networkx
    import scipy
    return {"curveweave": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "networkx": networkx.__version__}


def emit_manifest(run: RunManifest, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    run.versions = run.versions or _versions()
    path.write_text(json.dumps(asdict(run), indent=2, sort_keys=True) + "\n")
    return path


def _write(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _ranks(text: str) -> list[int]:
    try:
        ranks = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"ranks must be comma-separated integers: {text!r}") from None
    if not ranks or min(ranks) < 0:
        raise argparse.ArgumentTypeError("ranks must be non-negative")
    return ranks


def _square_side(n: int) -> int:
    side = math.isqrt(n)
    if side * side != n:
        raise UsageError(f"ordering has {n} cells, which is not a square grid; pass --graph")
    return side


# -- commands ---------------------------------------------------------------

def cmd_graph_build(args):
    if args.grid:
        graph = build_grid_graph(*args.grid)
        inputs = []
    else:
        mesh = load_mesh(args.mesh)
        inputs = [args.mesh]
        if mesh.discretization == "grid5":
            xs = np.unique(mesh.nodes[:, 0])
            ys = np.unique(mesh.nodes[:, 1])
            if len(xs) * len(ys) != mesh.n_nodes:
                raise InvalidArgument("grid5 nodes do not form a full rectangular grid")
            graph = build_grid_graph(len(xs), len(ys))
        else:
            graph = build_graph(mesh)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_graph(graph, out)
    print(f"{graph.n_vertices} vertices, {graph.n_edges} edges")
    return {"grid": args.grid, "mesh": args.mesh}, None, inputs, [out]


def cmd_sfc_build(args):
    graph = load_graph(args.graph)
    seeds = list(range(args.seed, args.seed + args.tries))
    seed, orderings = best_of_seeds(graph, seeds, m=args.count, sweeps=args.sweeps, gamma=args.gamma)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    outs = []
    rows = io.StringIO()
    w = csv.writer(rows, lineterminator="\n")
    w.writerow(["curve", "cost"])
    for k, o in enumerate(orderings):
        path = prefix.with_name(f"{prefix.name}.sfc{k}.txt")
        save_ordering(o, path)
        outs.append(path)
        cost = sfc_total_cost(graph, o)
        w.writerow([k, cost])
        print(f"curve {k}: cost {cost}")
    outs.append(_write(prefix.with_name(prefix.name + ".cost.csv"), rows.getvalue()))
    rep = edge_coverage(graph, orderings)
    outs.append(_write(prefix.with_name(prefix.name + ".coverage.csv"), format_coverage_csv(rep)))
    print(f"best seed {seed}; covered {rep.covered_edges}/{rep.total_edges}, shared {rep.shared_edges}")
    cfg = {"count": args.count, "gamma": args.gamma, "sweeps": args.sweeps, "tries": args.tries,
           "best_seed": seed}
    return cfg, args.seed, [args.graph], outs, prefix.with_name(prefix.name + ".manifest.json")


def cmd_sfc_hilbert(args):
    ordering = hilbert_ordering(args.level)
    if args.rotate:
        ordering = rotate_ordering(ordering, 1 << args.level, args.rotate)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_ordering(ordering, out)
    return {"level": args.level, "rotate": args.rotate}, None, [], [out]


def cmd_sfc_cost(args):
    ordering = load_ordering(args.ordering)
    if args.graph:
        graph = load_graph(args.graph)
    else:
        side = _square_side(ordering.n)
        graph = build_grid_graph(side, side)
    cost = sfc_total_cost(graph, ordering)
    print(cost)
    if args.out:
        out = _write(args.out, f"ordering,cost\n{args.ordering},{cost}\n")
        return {"graph": args.graph}, None, [args.ordering], [out]
    return None


def cmd_data(args):
    if args.kind == "square":
        cfg = AdvectionConfig.paper(args.seed) if args.preset == "paper" else AdvectionConfig.desk(args.seed)
        raw = generate_square_wave(cfg)
    else:
        cfg = GaussianConfig.paper(args.seed) if args.preset == "paper" else GaussianConfig.desk(args.seed)
        raw = generate_gaussians(cfg)
    snap = split(normalize(raw), rng=np.random.default_rng(args.seed))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_snapshots(snap, out)
    print(f"{snap.n_examples} examples x {snap.n_nodes} nodes; split {snap.split_sizes()}")
    config = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items()}
    config.update(kind=args.kind, preset=args.preset)
    return config, args.seed, [], [out]


def cmd_train(args):
    snap = load_snapshots(args.data)
    need = orderings_needed(args.preset)
    paths = [p for p in (args.ordering, args.ordering2) if p]
    if len(paths) < need:
        raise UsageError(f"preset {args.preset} needs {need} ordering file(s)")
    orderings = [load_ordering(p) for p in paths[:need]]
    model = build_preset(args.preset, snap.n_nodes, orderings, latent=args.latent,
                         channels=snap.n_channels, rng=np.random.default_rng(args.seed))
    cfg = TrainConfig(batch_size=args.batch, lr=args.lr, epochs=args.epochs, seed=args.seed)
    report = train(model, snap, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out / "model.cwm")
    save_loss_csv(report, out / "loss.csv")
    if report.train_mse:
        print(f"final train {report.train_mse[-1]:.6e} val {report.val_mse[-1]:.6e}")
    config = {"preset": args.preset, "latent": args.latent, **asdict(cfg)}
    outs = [out / "model.cwm", out / "loss.csv"]
    return config, args.seed, [args.data, *paths[:need]], outs, out / "manifest.json"


def cmd_svd(args):
    snap = load_snapshots(args.data)
    vals = snap.values if args.part == "all" else snap.part(args.part)
    m = snapshot_matrix(vals)
    res = svd(m)
    ranks = [k for k in args.ranks if k <= res.rank_capacity]
    if len(ranks) < len(args.ranks):
        raise InvalidArgument(f"ranks above {res.rank_capacity} are not available for this data")
    out = _write(args.out, format_rank_csv(res, ranks, vals.shape[1], vals.shape[0]))
    for k in ranks:
        print(f"rank {k}: {truncation_mse(res, k, vals.shape[1], vals.shape[0]):.6e}")
    return {"ranks": ranks, "part": args.part}, None, [args.data], [out]


def cmd_compare(args):
    model = load_checkpoint(Path(args.model) / "model.cwm")
    snap = load_snapshots(args.data)
    table = load_rank_csv(args.svd)
    latent = model.latent_size
    if latent not in table:
        raise InvalidArgument(f"SVD table has no rank {latent}")
    row = [model.meta.get("preset", "custom"), latent]
    row += [evaluate(model, snap.part(p)) for p in ("train", "val", "test")]
    row.append(table[latent])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "latent", "train_mse", "val_mse", "test_mse", "svd_mse"])
    w.writerow([v if isinstance(v, (str, int)) else repr(float(v)) for v in row])
    out = _write(args.out, buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return {}, None, [args.model, args.data, args.svd], [out]


def cmd_field_error(args):
    model = load_checkpoint(Path(args.model) / "model.cwm")
    snap = load_snapshots(args.data)
    if not 0 <= args.example < snap.n_examples:
        raise InvalidArgument(f"example {args.example} outside 0..{snap.n_examples - 1}")
    truth = snap.values[args.example:args.example + 1]
    pred = reconstruct(model, truth)[0]
    truth = truth[0]
    err = np.sqrt(np.sum((pred - truth) ** 2, axis=1))
    c = snap.n_channels
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["node"] + [f"true_{k}" for k in range(c)] + [f"pred_{k}" for k in range(c)] + ["error"]
    w.writerow(head)
    for i in range(snap.n_nodes):
        w.writerow([i, *map(repr, truth[i].tolist()), *map(repr, pred[i].tolist()), repr(float(err[i]))])
    out = _write(args.out, buf.getvalue())
    print(f"max pointwise error {err.max():.6e}")
    return {"example": args.example}, None, [args.model, args.data], [out]


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="curveweave", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("graph").add_subparsers(dest="action", required=True)
    gb = g.add_parser("build", help="graph from a mesh file or a structured grid")
    src = gb.add_mutually_exclusive_group(required=True)
    src.add_argument("--mesh")
    src.add_argument("--grid", nargs=2, type=int, metavar=("NX", "NY"))
    gb.add_argument("--out", required=True)
    gb.set_defaults(func=cmd_graph_build)

    s = sub.add_parser("sfc").add_subparsers(dest="action", required=True)
    sb = s.add_parser("build", help="curves by nested bisection")
    sb.add_argument("--graph", required=True)
    sb.add_argument("--seed", type=int, default=0)
    sb.add_argument("--tries", type=int, default=1, help="seeds tried, best kept")
    sb.add_argument("--count", type=int, default=1)
    sb.add_argument("--gamma", type=float, default=0.2)
    sb.add_argument("--sweeps", type=int, default=10)
    sb.add_argument("--out-prefix", required=True)
    sb.set_defaults(func=cmd_sfc_build)
    sh = s.add_parser("hilbert", help="Hilbert curve on a 2^K grid")
    sh.add_argument("--level", type=int, required=True)
    sh.add_argument("--rotate", type=int, default=0)
    sh.add_argument("--out", required=True)
    sh.set_defaults(func=cmd_sfc_hilbert)
    sc = s.add_parser("cost", help="total hop cost of an ordering")
    sc.add_argument("--ordering", required=True)
    sc.add_argument("--graph", help="defaults to the square grid matching the ordering")
    sc.add_argument("--out")
    sc.set_defaults(func=cmd_sfc_cost)

    d = sub.add_parser("data", help="generate a normalized, split snapshot set")
    d.add_argument("kind", choices=("square", "gauss"))
    d.add_argument("--preset", choices=("desk", "paper"), default="desk")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_data)

    t = sub.add_parser("train", help="train an autoencoder preset")
    t.add_argument("--data", required=True)
    t.add_argument("--preset", choices=PRESETS, required=True)
    t.add_argument("--ordering")
    t.add_argument("--ordering2")
    t.add_argument("--latent", type=int, default=16)
    t.add_argument("--epochs", type=int, default=500)
    t.add_argument("--lr", type=float, default=1e-4)
    t.add_argument("--batch", type=int, default=64)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    v = sub.add_parser("svd", help="truncation error of the snapshot SVD")
    v.add_argument("--data", required=True)
    v.add_argument("--ranks", type=_ranks, default=[1, 2, 4, 8, 16])
    v.add_argument("--part", choices=("all", "train", "val", "test"), default="all")
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_svd)

    c = sub.add_parser("compare", help="model MSE per split next to the SVD at the same rank")
    c.add_argument("--model", required=True)
    c.add_argument("--data", required=True)
    c.add_argument("--svd", required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_compare)

    f = sub.add_parser("field-error", help="pointwise reconstruction error of one example")
    f.add_argument("--model", required=True)
    f.add_argument("--data", required=True)
    f.add_argument("--example", type=int, required=True)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_field_error)
    return p


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        result = args.func(args)
    except UsageError as exc:
        print(f"curveweave: usage error: {exc}", file=sys.stderr)
        return 2
    except RUNTIME_ERRORS as exc:
        print(f"curveweave: error: {exc}", file=sys.stderr)
        return 1
    if result is not None:
        config, seed, inputs, outputs = result[:4]
        where = result[4] if len(result) > 4 else Path(outputs[0]).with_name(Path(outputs[0]).name + ".manifest.json")
        name = " ".join(a for a in (args.command, getattr(args, "action", None)) if a)
        manifest = RunManifest(name, argv, config, seed, [str(i) for i in inputs],
                               [str(o) for o in outputs], time.perf_counter() - start)
        emit_manifest(manifest, where)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
