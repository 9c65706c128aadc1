"""Synthetic snapshot datasets: advected square waves and Gaussian bumps.

Fields live on an ``nx x ny`` grid of cell centres indexed row-major,
``v = j * nx + i`` with ``i`` along x. A :class:`SnapshotSet` stores values as
an ``(E, N, C)`` array together with an affine normalisation record and
optional train/val/test labels.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import InvalidArgument, MeshParseError

TRAIN, VAL, TEST = 0, 1, 2
SPLIT_NAMES = {"train": TRAIN, "val": VAL, "test": TEST}


@dataclass(frozen=True)
class AdvectionConfig:
    nx: int = 32
    ny: int = 32
    length: float = 3.0
    u: float = 1.0
    v: float = 1.0
    dt: float = 1e-2
    n_steps: int = 10
    n_samples: int = 64
    square_side: float = 0.5
    origin_range: tuple[float, float] = (0.0, 2.0)
    seed: int = 0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise InvalidArgument("grid needs at least 2 cells per side")
        if self.dt <= 0:
            raise InvalidArgument("time step must be positive")
        if self.u < 0 or self.v < 0:
            raise InvalidArgument("only non-negative velocities are supported")
        if self.n_steps < 1 or self.n_samples < 1:
            raise InvalidArgument("need at least one sample and one time level")

    @classmethod
    def paper(cls, seed: int = 0) -> "AdvectionConfig":
        return cls(nx=128, ny=128, n_steps=30, n_samples=512, seed=seed)

    @classmethod
    def desk(cls, seed: int = 0) -> "AdvectionConfig":
        return cls(seed=seed)

    @property
    def dx(self) -> float:
        return self.length / self.nx

    @property
    def dy(self) -> float:
        return self.length / self.ny


@dataclass(frozen=True)
class GaussianConfig:
    nx: int = 32
    ny: int = 32
    n_samples: int = 640
    sigma_range: tuple[float, float] = (2.5, 5.0)
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.sigma_range
        if not (0 < lo <= hi < np.inf):
            raise InvalidArgument("sigma range must lie in (0, inf)")
        if self.nx < 1 or self.ny < 1 or self.n_samples < 1:
            raise InvalidArgument("grid and sample count must be positive")

    @classmethod
    def paper(cls, seed: int = 0) -> "GaussianConfig":
        return cls(nx=128, ny=128, n_samples=15360, sigma_range=(10.0, 20.0), seed=seed)

    @classmethod
    def desk(cls, seed: int = 0) -> "GaussianConfig":
        return cls(seed=seed)


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """``values[e, n, c]``; physical value = ``lo[c] + stored * (hi[c] - lo[c])``."""

    values: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    split: np.ndarray | None = None
    constant_channels: tuple[int, ...] = field(default=())

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 3:
            raise InvalidArgument("values must have shape (examples, nodes, channels)")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=np.float64).reshape(-1))
        if self.lo.size != vals.shape[2] or self.hi.size != vals.shape[2]:
            raise InvalidArgument("one normalisation pair per channel is required")
        if np.any(self.hi == self.lo):
            raise InvalidArgument("normalisation record is not invertible")
        if self.split is not None:
            lab = np.asarray(self.split, dtype=np.uint8)
            if lab.shape != (vals.shape[0],) or np.any(lab > 2):
                raise InvalidArgument("split labels must be 0/1/2, one per example")
            object.__setattr__(self, "split", lab)

    @classmethod
    def raw(cls, values) -> "SnapshotSet":
        vals = np.asarray(values, dtype=np.float64)
        if vals.ndim == 2:
            vals = vals[:, :, None]
        c = vals.shape[2]
        return cls(vals, np.zeros(c), np.ones(c))

    @property
    def n_examples(self) -> int:
        return self.values.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.values.shape[1]

    @property
    def n_channels(self) -> int:
        return self.values.shape[2]

    def physical(self) -> np.ndarray:
        return self.lo + self.values * (self.hi - self.lo)

    def part(self, name: str) -> np.ndarray:
        """Stored values of one split, ``(E_part, N, C)``."""
        if self.split is None:
            raise InvalidArgument("snapshot set has no split labels")
        return self.values[self.split == SPLIT_NAMES[name]]

    def split_sizes(self) -> tuple[int, int, int]:
        if self.split is None:
            return (self.n_examples, 0, 0)
        counts = np.bincount(self.split, minlength=3)
        return tuple(int(c) for c in counts)


class AdvectionOperator:
    """Backward Euler with first-order upwinding, factorised once.

    For ``u, v >= 0`` the system matrix is lower triangular in row-major
    order, so the LU factorisation is exact and each solve is a substitution.
    """

    def __init__(self, cfg: AdvectionConfig):
        self.cfg = cfg
        nx, ny = cfg.nx, cfg.ny
        lx, ly = cfg.u * cfg.dt / cfg.dx, cfg.v * cfg.dt / cfg.dy
        n = nx * ny
        idx = np.arange(n)
        i, j = idx % nx, idx // nx
        rows = [idx]
        cols = [idx]
        data = [np.full(n, 1.0 + lx + ly)]
        west = i > 0
        rows.append(idx[west])
        cols.append(idx[west] - 1)
        data.append(np.full(west.sum(), -lx))
        south = j > 0
        rows.append(idx[south])
        cols.append(idx[south] - nx)
        data.append(np.full(south.sum(), -ly))
        mat = sp.csc_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(n, n))
        self._lu = splu(mat, permc_spec="NATURAL")

    def __call__(self, fields: np.ndarray) -> np.ndarray:
        """Advance one step; ``fields`` is ``(N,)`` or ``(N, batch)``."""
        return self._lu.solve(np.asarray(fields, dtype=np.float64))


def step_advection(field_values, cfg: AdvectionConfig) -> np.ndarray:
    vals = np.asarray(field_values, dtype=np.float64)
    if vals.shape[0] != cfg.nx * cfg.ny:
        raise InvalidArgument(f"field has {vals.shape[0]} values, grid has {cfg.nx * cfg.ny}")
    return AdvectionOperator(cfg)(vals)


def cell_centres(nx: int, ny: int, length: float) -> tuple[np.ndarray, np.ndarray]:
    """Row-major x and y coordinates of the cell centres."""
    xs = (np.arange(nx) + 0.5) * length / nx
    ys = (np.arange(ny) + 0.5) * length / ny
    gx, gy = np.meshgrid(xs, ys)
    return gx.reshape(-1), gy.reshape(-1)


def square_wave(cfg: AdvectionConfig, x0: float, y0: float) -> np.ndarray:
    x, y = cell_centres(cfg.nx, cfg.ny, cfg.length)
    s = cfg.square_side
    inside = (x >= x0) & (x <= x0 + s) & (y >= y0) & (y <= y0 + s)
    return inside.astype(np.float64)


def generate_square_wave(cfg: AdvectionConfig) -> SnapshotSet:
    """``N_s`` random squares, each recorded at time levels ``0 .. N_t - 1``.

    Example ``s * N_t + t`` is sample ``s`` after ``t`` steps.
    """
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.origin_range
    origins = rng.uniform(lo, hi, size=(cfg.n_samples, 2))
    current = np.stack([square_wave(cfg, x0, y0) for x0, y0 in origins], axis=1)
    op = AdvectionOperator(cfg)
    n = cfg.nx * cfg.ny
    out = np.empty((cfg.n_samples, cfg.n_steps, n))
    for t in range(cfg.n_steps):
        out[:, t, :] = current.T
        if t + 1 < cfg.n_steps:
            current = op(current)
    return SnapshotSet.raw(out.reshape(cfg.n_samples * cfg.n_steps, n))


def gaussian_field(nx: int, ny: int, xc: float, yc: float, sigma: float) -> np.ndarray:
    gx, gy = np.meshgrid(np.arange(nx, dtype=float), np.arange(ny, dtype=float))
    r2 = (gx - xc) ** 2 + (gy - yc) ** 2
    return np.exp(-r2 / (2.0 * sigma**2)).reshape(-1)


def generate_gaussians(cfg: GaussianConfig) -> SnapshotSet:
    """Gaussians with centres uniform over the grid and sigma in grid units."""
    rng = np.random.default_rng(cfg.seed)
    xc = rng.uniform(0, cfg.nx - 1, cfg.n_samples)
    yc = rng.uniform(0, cfg.ny - 1, cfg.n_samples)
    sig = rng.uniform(*cfg.sigma_range, cfg.n_samples)
    vals = np.stack([gaussian_field(cfg.nx, cfg.ny, a, b, s) for a, b, s in zip(xc, yc, sig)])
    return SnapshotSet.raw(vals)


def normalize(snap: SnapshotSet, target: tuple[float, float] = (0.0, 1.0)) -> SnapshotSet:
    """Affinely map each channel's physical range onto ``target``.

    A constant channel is sent to the midpoint of ``target`` with unit scale
    and listed in ``constant_channels``.
    """
    t0, t1 = float(target[0]), float(target[1])
    if not t1 > t0:
        raise InvalidArgument("target interval must have positive width")
    phys = snap.physical()
    mins = phys.min(axis=(0, 1))
    maxs = phys.max(axis=(0, 1))
    scale = np.where(maxs > mins, (maxs - mins) / (t1 - t0), 1.0)
    offset = np.where(maxs > mins, mins, mins - 0.5 * (t0 + t1))
    # stored = t0 + (phys - min) / scale, so phys = min + (stored - t0) * scale
    lo = np.where(maxs > mins, offset - t0 * scale, offset)
    hi = lo + scale
    stored = (phys - lo) / scale
    flagged = tuple(int(c) for c in np.flatnonzero(maxs == mins))
    return replace(snap, values=stored, lo=lo, hi=hi, constant_channels=flagged)


def denormalize(snap: SnapshotSet) -> SnapshotSet:
    c = snap.n_channels
    return replace(snap, values=snap.physical(), lo=np.zeros(c), hi=np.ones(c),
                   constant_channels=())


def split_sizes(n: int, ratios) -> tuple[int, ...]:
    """Largest-remainder rounding of ``n * r / sum(r)``; ties go to the first part."""
    r = np.asarray(ratios, dtype=float)
    if r.ndim != 1 or np.any(r <= 0):
        raise InvalidArgument("ratios must be positive")
    exact = n * r / r.sum()
    sizes = np.floor(exact).astype(int)
    short = n - sizes.sum()
    order = np.argsort(-(exact - sizes), kind="stable")
    sizes[order[:short]] += 1
    return tuple(int(s) for s in sizes)


def split(snap: SnapshotSet, ratios=(6, 2, 2), rng: np.random.Generator | None = None) -> SnapshotSet:
    if len(ratios) != 3:
        raise InvalidArgument("need train, val and test ratios")
    rng = np.random.default_rng(0) if rng is None else rng
    sizes = split_sizes(snap.n_examples, ratios)
    perm = rng.permutation(snap.n_examples)
    labels = np.empty(snap.n_examples, dtype=np.uint8)
    labels[perm[:sizes[0]]] = TRAIN
    labels[perm[sizes[0]:sizes[0] + sizes[1]]] = VAL
    labels[perm[sizes[0] + sizes[1]:]] = TEST
    return replace(snap, split=labels)


_HEAD = struct.Struct("<4sQQII")


def save_snapshots(snap: SnapshotSet, path: str | Path) -> None:
    e, n, c = snap.values.shape
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(b"SNP1", n, e, c, int(snap.split is not None)))
        fh.write(snap.values.astype("<f8").tobytes())
        if snap.split is not None:
            fh.write(snap.split.astype(np.uint8).tobytes())
        fh.write(np.stack([snap.lo, snap.hi], axis=1).astype("<f8").tobytes())


def load_snapshots(path: str | Path) -> SnapshotSet:
    data = Path(path).read_bytes()
    if len(data) < _HEAD.size:
        raise MeshParseError("snapshot file is truncated")
    magic, n, e, c, flag = _HEAD.unpack_from(data)
    if magic != b"SNP1":
        raise MeshParseError("not a snapshot file (bad magic)")
    expected = _HEAD.size + 8 * e * n * c + (e if flag else 0) + 16 * c
    if len(data) != expected:
        raise MeshParseError(f"snapshot file has {len(data)} bytes, expected {expected}")
    off = _HEAD.size
    vals = np.frombuffer(data, "<f8", e * n * c, off).reshape(e, n, c).copy()
    off += 8 * e * n * c
    labels = None
    if flag:
        labels = np.frombuffer(data, np.uint8, e, off).copy()
        off += e
    rec = np.frombuffer(data, "<f8", 2 * c, off).reshape(c, 2)
    return SnapshotSet(vals, rec[:, 0].copy(), rec[:, 1].copy(), labels)
