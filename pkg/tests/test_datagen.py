import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curveweave.datagen import (AdvectionConfig, AdvectionOperator, GaussianConfig, SnapshotSet,
                                denormalize, gaussian_field, generate_gaussians, generate_square_wave,
                                load_snapshots, normalize, save_snapshots, split, split_sizes,
                                step_advection)
from curveweave.errors import InvalidArgument, MeshParseError

UNIT = AdvectionConfig(nx=5, ny=5, length=5.0, u=1.0, v=1.0, dt=1.0)


def test_zero_field_stays_zero():
    assert np.all(step_advection(np.zeros(25), UNIT) == 0)


def test_isolated_cell_becomes_one_third():
    f = np.zeros(25)
    f[12] = 1.0
    assert step_advection(f, UNIT)[12] == pytest.approx(1 / 3, abs=1e-14)


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 3.0), st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_max_principle_and_mass(seed, dt, u, v):
    cfg = AdvectionConfig(nx=6, ny=7, u=u, v=v, dt=dt)
    rng = np.random.default_rng(seed)
    f = rng.uniform(-1, 2, size=42)
    out = step_advection(f, cfg)
    assert out.max() <= max(0.0, f.max()) + 1e-12
    assert out.min() >= min(0.0, f.min()) - 1e-12
    pos = np.abs(f)
    assert step_advection(pos, cfg).sum() <= pos.sum() + 1e-12


def test_operator_batches_match_single():
    cfg = AdvectionConfig(nx=8, ny=8)
    op = AdvectionOperator(cfg)
    block = np.random.default_rng(0).random((64, 3))
    assert np.allclose(op(block), np.stack([op(block[:, k]) for k in range(3)], axis=1))


def test_negative_velocity_rejected():
    with pytest.raises(InvalidArgument):
        AdvectionConfig(u=-1.0)


def test_square_wave_shapes_and_bounds():
    one = generate_square_wave(AdvectionConfig(n_samples=1, n_steps=1))
    assert one.values.shape == (1, 1024, 1)
    desk = generate_square_wave(AdvectionConfig(nx=16, ny=16, n_samples=4, n_steps=5))
    assert desk.values.shape == (20, 256, 1)
    assert desk.values.min() >= 0 and desk.values.max() <= 1
    assert AdvectionConfig.paper().n_samples * AdvectionConfig.paper().n_steps == 15360


def test_gaussian_examples():
    f = gaussian_field(9, 9, 4.0, 4.0, 2.0)
    assert f[4 * 9 + 4] == pytest.approx(1.0)
    assert f[4 * 9 + 6] == pytest.approx(np.exp(-0.5))
    assert GaussianConfig.paper().n_samples == 15360
    g = generate_gaussians(GaussianConfig(nx=8, ny=8, n_samples=5))
    assert g.values.shape == (5, 64, 1)


def test_normalize_examples():
    s = SnapshotSet.raw(np.array([[2.0, 3.0, 4.0]]))
    n = normalize(s)
    assert n.values[0, :, 0].tolist() == [0.0, 0.5, 1.0]
    assert np.allclose(denormalize(n).values, s.values, atol=1e-12)
    m = normalize(SnapshotSet.raw(np.array([[0.0, 0.5, 1.0]])), (-1.0, 1.0))
    assert m.values[0, 1, 0] == pytest.approx(0.0)


def test_constant_channel_flagged():
    n = normalize(SnapshotSet.raw(np.full((2, 3), 7.0)))
    assert n.constant_channels == (0,)
    assert np.allclose(n.physical(), 7.0)


@given(st.integers(1, 400), st.tuples(st.integers(1, 9), st.integers(1, 9), st.integers(1, 9)))
def test_split_sizes_sum(n, ratios):
    sizes = split_sizes(n, ratios)
    assert sum(sizes) == n
    exact = [n * r / sum(ratios) for r in ratios]
    assert all(abs(a - b) < 1 for a, b in zip(sizes, exact))


@pytest.mark.parametrize("n, ratios, sizes", [
    (10, (6, 2, 2), (6, 2, 2)), (15360, (6, 2, 2), (9216, 3072, 3072)),
    (1000, (8, 1, 1), (800, 100, 100)), (640, (6, 2, 2), (384, 128, 128)),
])
def test_split_examples(n, ratios, sizes):
    snap = split(SnapshotSet.raw(np.zeros((n, 1))), ratios, np.random.default_rng(0))
    assert snap.split_sizes() == sizes


def test_snapshot_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    s = split(normalize(SnapshotSet.raw(rng.random((10, 6, 2)))), rng=rng)
    p = tmp_path / "s.snp"
    save_snapshots(s, p)
    back = load_snapshots(p)
    assert np.array_equal(back.values, s.values)
    assert np.array_equal(back.split, s.split)
    assert np.array_equal(back.lo, s.lo) and np.array_equal(back.hi, s.hi)


def test_snapshot_bad_files(tmp_path):
    p = tmp_path / "s.snp"
    p.write_bytes(b"XXXX" + bytes(40))
    with pytest.raises(MeshParseError):
        load_snapshots(p)
    save_snapshots(SnapshotSet.raw(np.zeros((2, 3))), p)
    p.write_bytes(p.read_bytes()[:-1])
    with pytest.raises(MeshParseError):
        load_snapshots(p)
