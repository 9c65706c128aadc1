"""Truncated SVD of snapshot matrices and its truncation error."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, MeshParseError


@dataclass(frozen=True)
class SvdResult:
    U: np.ndarray       # (N, r)
    sigma: np.ndarray   # (r,), descending
    V: np.ndarray       # (E, r)

    @property
    def rank_capacity(self) -> int:
        return self.sigma.size


def svd(matrix) -> SvdResult:
    """Thin SVD with each column of U signed so its first nonzero entry is positive."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise InvalidArgument("expected a 2D matrix")
    if not np.all(np.isfinite(m)):
        raise InvalidArgument("matrix has non-finite entries")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    v = vt.T
    for j in range(u.shape[1]):
        nz = np.flatnonzero(np.abs(u[:, j]) > 1e-12)
        if nz.size and u[nz[0], j] < 0:
            u[:, j] *= -1
            v[:, j] *= -1
    return SvdResult(u, s, v)


def _check_rank(res: SvdResult, k: int) -> None:
    if not 0 <= k <= res.rank_capacity:
        raise InvalidArgument(f"rank {k} outside 0..{res.rank_capacity}")


def truncate_reconstruct(res: SvdResult, k: int) -> np.ndarray:
    _check_rank(res, k)
    return (res.U[:, :k] * res.sigma[:k]) @ res.V[:, :k].T


def truncation_mse(res: SvdResult, k: int, n_nodes: int, n_examples: int) -> float:
    """Discarded energy ``sum_{i>k} sigma_i^2`` divided by ``N * E``."""
    _check_rank(res, k)
    tail = res.sigma[k:]
    return float(np.sum(tail * tail) / (n_nodes * n_examples))


def snapshot_matrix(values: np.ndarray) -> np.ndarray:
    """``(E, N, C)`` values to a node-major ``(C*N, E)`` matrix, channels stacked."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 2:
        v = v[:, :, None]
    e, n, c = v.shape
    return np.transpose(v, (2, 1, 0)).reshape(c * n, e)


def format_singular_values_csv(res: SvdResult, n_nodes: int, n_examples: int) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["index", "sigma", "truncation_mse"])
    for i, s in enumerate(res.sigma, start=1):
        w.writerow([i, repr(float(s)), repr(truncation_mse(res, i, n_nodes, n_examples))])
    return out.getvalue()


def format_rank_csv(res: SvdResult, ranks, n_nodes: int, n_examples: int) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["rank", "sigma_k", "truncation_mse"])
    for k in ranks:
        _check_rank(res, k)
        sig = float(res.sigma[k - 1]) if k >= 1 else float("nan")
        w.writerow([k, repr(sig), repr(truncation_mse(res, k, n_nodes, n_examples))])
    return out.getvalue()


def load_rank_csv(path: str | Path) -> dict[int, float]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["rank", "sigma_k", "truncation_mse"]:
        raise MeshParseError("bad SVD CSV header", 1)
    out = {}
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise MeshParseError("expected 3 columns", i)
        out[int(row[0])] = float(row[2])
    return out
