import json

import numpy as np
import pytest

from curveweave.cli import run
from curveweave.datagen import SnapshotSet, save_snapshots, split


def test_hilbert_cost_is_63(tmp_path, capsys):
    o = tmp_path / "h.txt"
    assert run(["sfc", "hilbert", "--level", "3", "--out", str(o)]) == 0
    capsys.readouterr()
    assert run(["sfc", "cost", "--ordering", str(o)]) == 0
    assert capsys.readouterr().out.strip() == "63"


def test_usage_errors_exit_2(tmp_path, capsys):
    assert run(["train", "--data", "x", "--preset", "sfc9", "--out", str(tmp_path)]) == 2
    assert "sfc2-nn" in capsys.readouterr().err
    assert run(["bogus"]) == 2


def test_missing_file_exits_1(tmp_path, capsys):
    assert run(["sfc", "build", "--graph", str(tmp_path / "none.graph"),
                "--out-prefix", str(tmp_path / "c")]) == 1
    assert "error" in capsys.readouterr().err


def test_cost_on_non_square_needs_graph(tmp_path):
    o = tmp_path / "o.txt"
    o.write_text("sfc v1 3\n0\n1\n2\n")
    assert run(["sfc", "cost", "--ordering", str(o)]) == 2


def test_graph_and_sfc_build_create_dirs(tmp_path):
    g = tmp_path / "deep" / "grid.graph"
    assert run(["graph", "build", "--grid", "8", "8", "--out", str(g)]) == 0
    prefix = tmp_path / "more" / "grid"
    assert run(["sfc", "build", "--graph", str(g), "--count", "2", "--out-prefix", str(prefix)]) == 0
    for suffix in (".sfc0.txt", ".sfc1.txt", ".cost.csv", ".coverage.csv", ".manifest.json"):
        assert (tmp_path / "more" / ("grid" + suffix)).exists()
    man = json.loads((tmp_path / "more" / "grid.manifest.json").read_text())
    assert man["seed"] == 0 and man["config"]["count"] == 2
    assert set(man["versions"]) >= {"numpy", "python"}


def _tiny_data(path):
    rng = np.random.default_rng(0)
    vals = np.clip(rng.random((1, 64, 1)) + 0.05 * rng.standard_normal((30, 64, 1)), 0, 1)
    save_snapshots(split(SnapshotSet.raw(vals[:, :, 0]), rng=np.random.default_rng(0)), path)


def _pipeline(root):
    root.mkdir()
    data = root / "d.snp"
    _tiny_data(data)
    assert run(["graph", "build", "--grid", "8", "8", "--out", str(root / "g.graph")]) == 0
    assert run(["sfc", "build", "--graph", str(root / "g.graph"), "--count", "2",
                "--out-prefix", str(root / "c")]) == 0
    assert run(["train", "--data", str(data), "--preset", "sfc2-nn", "--ordering", str(root / "c.sfc0.txt"),
                "--ordering2", str(root / "c.sfc1.txt"), "--latent", "4", "--epochs", "3", "--batch", "8",
                "--lr", "1e-3", "--seed", "5", "--out", str(root / "run")]) == 0
    assert run(["svd", "--data", str(data), "--ranks", "1,2,4", "--out", str(root / "svd.csv")]) == 0
    assert run(["compare", "--model", str(root / "run"), "--data", str(data), "--svd", str(root / "svd.csv"),
                "--out", str(root / "cmp.csv")]) == 0
    assert run(["field-error", "--model", str(root / "run"), "--data", str(data), "--example", "2",
                "--out", str(root / "fe.csv")]) == 0
    return [root / n for n in ("c.cost.csv", "run/loss.csv", "svd.csv", "cmp.csv", "fe.csv")]


def test_pipeline_reproducible(tmp_path, capsys):
    a = _pipeline(tmp_path / "a")
    b = _pipeline(tmp_path / "b")
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes(), x.name
    assert (tmp_path / "a" / "run" / "model.cwm").read_bytes() == (tmp_path / "b" / "run" / "model.cwm").read_bytes()

    cmp_rows = (tmp_path / "a" / "cmp.csv").read_text().splitlines()
    assert cmp_rows[0] == "model,latent,train_mse,val_mse,test_mse,svd_mse"
    assert cmp_rows[1].startswith("sfc2-nn,4,")
    fe = (tmp_path / "a" / "fe.csv").read_text().splitlines()
    assert fe[0] == "node,true_0,pred_0,error" and len(fe) == 65
    assert len((tmp_path / "a" / "run" / "loss.csv").read_text().splitlines()) == 4

    man = json.loads((tmp_path / "a" / "run" / "manifest.json").read_text())
    assert man["seed"] == 5 and man["config"]["preset"] == "sfc2-nn" and man["config"]["epochs"] == 3


def test_train_missing_ordering_is_usage_error(tmp_path):
    data = tmp_path / "d.snp"
    _tiny_data(data)
    assert run(["train", "--data", str(data), "--preset", "sfc1", "--out", str(tmp_path / "r")]) == 2


@pytest.mark.parametrize("bad", [["--example", "99"], ["--example", "-1"]])
def test_field_error_range(tmp_path, bad):
    data = tmp_path / "d.snp"
    _tiny_data(data)
    run(["sfc", "hilbert", "--level", "3", "--out", str(tmp_path / "h.txt")])
    assert run(["train", "--data", str(data), "--preset", "sfc1", "--ordering", str(tmp_path / "h.txt"),
                "--latent", "2", "--epochs", "1", "--out", str(tmp_path / "r")]) == 0
    assert run(["field-error", "--model", str(tmp_path / "r"), "--data", str(data), *bad,
                "--out", str(tmp_path / "f.csv")]) == 1
