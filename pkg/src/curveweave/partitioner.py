"""Normalised mean-field graph bisection and nested partition hierarchies.

Each vertex carries a probability vector ``z_i`` over ``S = 2`` partitions.
The functional being minimised is

    F = 1/2 z^T K z + 1/2 alpha z^T C z

where ``K`` couples a vertex to its neighbours in *other* partitions with the
edge weight ``h_ij`` and ``C`` penalises unequal partition sizes. For a hard
assignment the first term is the cut weight and the second is
``alpha/4 (n_1 - n_2)^2``.

Minimisation is mean-field annealing: vertices are visited in random order
and ``z_i`` is replaced by the softmax of ``-dF/dz_i / T`` while ``T`` is
lowered geometrically. The soft state is then rounded to exact balance using
the membership probabilities, and polished with Kernighan-Lin pair swaps and
a final greedy pass until no balance-preserving move lowers the cut.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import networkx as nx
import numpy as np
from networkx.algorithms.community import kernighan_lin_bisection

from .errors import DisconnectedGraph, InvalidArgument
from .mesh_graph import Graph

S = 2
COOLING = 0.9
MAX_SWEEPS = 500
TOLERANCE = 1e-4
NOISE = 0.01


def levels_needed(n: int) -> int:
    """Smallest ``L`` with ``2**L >= n``."""
    if n < 1:
        raise InvalidArgument("need at least one vertex")
    return (n - 1).bit_length()


def compute_alpha(graph: Graph, subset: Sequence[int] | None = None) -> float:
    """Balance weight ``(1 / (S N)) * sum_ij K_ij`` over the (induced) graph."""
    if subset is None:
        n = graph.n_vertices
        total = float(graph.weights.sum())
    else:
        inside = set(int(v) for v in subset)
        n = len(inside)
        total = 0.0
        for i in inside:
            for j, w in zip(graph.neighbors(i), graph.neighbor_weights(i)):
                if j in inside:
                    total += w
    if n == 0:
        raise InvalidArgument("graph is empty")
    return total / (S * n)


@dataclass
class MftState:
    """Membership probabilities, one row per vertex, rows summing to 1."""

    z: np.ndarray
    temperature: float = 1.0

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        if self.z.ndim != 2:
            raise InvalidArgument("z must be an (n, S) matrix")
        if np.any(self.z < 0) or np.any(self.z > 1):
            raise InvalidArgument("probabilities must lie in [0, 1]")
        if np.any(np.abs(self.z.sum(axis=1) - 1.0) > 1e-12):
            raise InvalidArgument("each row of z must sum to 1")


def _local_graph(graph: Graph, verts: list[int]):
    index = {v: k for k, v in enumerate(verts)}
    nbr, wts = [], []
    for v in verts:
        ln, lw = [], []
        for j, w in zip(graph.neighbors(v), graph.neighbor_weights(v)):
            k = index.get(j)
            if k is not None:
                ln.append(k)
                lw.append(float(w))
        nbr.append(ln)
        wts.append(lw)
    return nbr, wts


def anneal(nbr, wts, alpha: float, rng: np.random.Generator,
           trace: list | None = None) -> MftState:
    """Mean-field annealing of the two-way functional.

    Only ``p_i = z_i^0`` is stored; ``z_i^1 = 1 - p_i`` is implied, which
    keeps the row sums exact.
    """
    n = len(nbr)
    p = 0.5 + rng.uniform(-NOISE, NOISE, size=n)
    total = float(p.sum())

    def field_gap(i):
        # dF/dz_i^1 - dF/dz_i^0, self-coupling excluded
        s = 0.0
        for j, w in zip(nbr[i], wts[i]):
            s += w * (2.0 * p[j] - 1.0)
        own = total - p[i]
        return s + alpha * ((n - 1 - own) - own)

    # starting temperature: mean magnitude of the two partition fields
    mags = []
    for i in range(n):
        cut0 = sum(w * (1.0 - p[j]) for j, w in zip(nbr[i], wts[i]))
        cut1 = sum(w * p[j] for j, w in zip(nbr[i], wts[i]))
        own = total - p[i]
        bal = 0.5 * alpha * (own - (n - 1 - own))
        mags += [abs(cut0 + bal), abs(cut1 - bal)]
    t0 = float(np.mean(mags)) or 1.0
    temp = t0

    for _ in range(MAX_SWEEPS):
        biggest = 0.0
        for i in rng.permutation(n):
            x = field_gap(i) / temp
            new = 1.0 / (1.0 + math.exp(-x)) if x > -700 else 0.0
            delta = new - p[i]
            total += delta
            p[i] = new
            biggest = max(biggest, abs(delta))
        if trace is not None:
            trace.append(np.stack([p, 1.0 - p], axis=1))
        temp *= COOLING
        settled = float(np.mean(p * (1.0 - p))) < 1e-3 or temp < 1e-3 * t0
        if biggest < TOLERANCE and settled:
            break
    return MftState(np.stack([p, 1.0 - p], axis=1), temp)


def rebalance(state: MftState, target_counts: tuple[int, int]) -> np.ndarray:
    """Round probabilities to a hard assignment with exact partition sizes.

    Each vertex goes to its most probable partition (ties to the lower id);
    an over-full partition then donates the vertices most likely to belong to
    the receiving partition, ties broken by vertex index.
    """
    z = state.z
    n, s = z.shape
    targets = [int(t) for t in target_counts]
    if len(targets) != s or sum(targets) != n or min(targets) < 0:
        raise InvalidArgument(f"targets {targets} do not split {n} vertices")
    assign = np.argmax(z, axis=1)
    counts = np.bincount(assign, minlength=s)
    while True:
        over = [m for m in range(s) if counts[m] > targets[m]]
        under = [m for m in range(s) if counts[m] < targets[m]]
        if not over:
            break
        donor, receiver = over[0], under[0]
        members = np.flatnonzero(assign == donor)
        # stable sort on descending receiver probability keeps index order on ties
        order = members[np.argsort(-z[members, receiver], kind="stable")]
        k = min(counts[donor] - targets[donor], targets[receiver] - counts[receiver])
        assign[order[:k]] = receiver
        counts[donor] -= k
        counts[receiver] += k
    return assign


def cut_weight(graph: Graph, left) -> float:
    left = set(int(v) for v in left)
    return sum(w for i, j, w in graph.edges() if (i in left) != (j in left))


def _kernighan_lin(nbr, wts, side: np.ndarray, rng: np.random.Generator) -> None:
    # pair swaps with hill climbing and rollback; sizes are preserved
    g = nx.Graph()
    g.add_nodes_from(range(len(nbr)))
    g.add_weighted_edges_from((i, j, w) for i in range(len(nbr))
                              for j, w in zip(nbr[i], wts[i]) if i < j)
    halves = (set(np.flatnonzero(side == 0).tolist()), set(np.flatnonzero(side == 1).tolist()))
    if not halves[0] or not halves[1]:
        return
    left, _ = kernighan_lin_bisection(g, halves, max_iter=20, weight="weight",
                                      seed=int(rng.integers(2**31)))
    side[:] = 1
    side[list(left)] = 0


def _refine(nbr, wts, side: np.ndarray) -> None:
    """Balance-preserving moves until no single move or swap lowers the cut."""
    n = len(nbr)
    wmap = [dict(zip(nbr[i], wts[i])) for i in range(n)]
    for _ in range(50 * n + 50):
        gain = np.zeros(n)
        for i in range(n):
            for j, w in zip(nbr[i], wts[i]):
                gain[i] += w if side[j] != side[i] else -w
        sizes = (int(np.sum(side == 0)), int(np.sum(side == 1)))
        best, move = 1e-9, None
        if sizes[0] != sizes[1]:
            big = 0 if sizes[0] > sizes[1] else 1
            cands = np.flatnonzero(side == big)
            i = cands[np.argmax(gain[cands])]
            if gain[i] > best:
                best, move = gain[i], (int(i),)
        a_side = np.flatnonzero(side == 0)
        b_side = np.flatnonzero(side == 1)
        a_side = a_side[np.argsort(-gain[a_side], kind="stable")]
        b_side = b_side[np.argsort(-gain[b_side], kind="stable")]
        if len(a_side) and len(b_side):
            top_b = gain[b_side[0]]
            for a in a_side:
                if gain[a] + top_b <= best:
                    break
                for b in b_side:
                    g = gain[a] + gain[b]
                    if g <= best:
                        break
                    g -= 2.0 * wmap[a].get(int(b), 0.0)
                    if g > best:
                        best, move = g, (int(a), int(b))
        if move is None:
            return
        for v in move:
            side[v] = 1 - side[v]


def mft_bisect(graph: Graph, vertex_subset: Sequence[int], rng: np.random.Generator,
               require_connected: bool = True) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Split ``vertex_subset`` into two halves whose sizes differ by at most one.

    Raises :class:`DisconnectedGraph` if the induced subgraph is disconnected
    and ``require_connected`` is set. Nested bisection turns the check off,
    since a balanced cut of a connected graph need not have connected halves.
    """
    verts = sorted(set(int(v) for v in vertex_subset))
    if not verts:
        return (), ()
    if require_connected:
        comps = graph.components(verts)
        if len(comps) > 1:
            raise DisconnectedGraph([c[0] for c in comps])
    if len(verts) == 1:
        return (verts[0],), ()
    nbr, wts = _local_graph(graph, verts)
    alpha = sum(map(sum, wts)) / (S * len(verts))
    state = anneal(nbr, wts, alpha, rng)
    n = len(verts)
    mass = state.z.sum(axis=0)
    big = n - n // 2
    targets = (big, n - big) if mass[0] >= mass[1] else (n - big, big)
    side = rebalance(state, targets)
    _kernighan_lin(nbr, wts, side, rng)
    _refine(nbr, wts, side)
    left = tuple(v for v, s in zip(verts, side) if s == 0)
    right = tuple(v for v, s in zip(verts, side) if s == 1)
    return left, right


@dataclass(frozen=True)
class PartitionHierarchy:
    """Nested partitions; ``levels[l][v]`` is the id of ``v``'s partition at
    level ``l`` (level 0 is the whole graph). Partition ``p`` at level ``l``
    splits into ``2p`` and ``2p + 1`` at level ``l + 1``."""

    levels: tuple[np.ndarray, ...]

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def members(self, level: int, part: int) -> np.ndarray:
        return np.flatnonzero(self.levels[level] == part)

    def parent(self, level: int, part: int) -> int:
        return part // 2

    def multi_vertex_partitions(self) -> int:
        counts = np.bincount(self.levels[-1])
        return int(np.sum(counts >= 2))

    def check_nested(self) -> None:
        for a, b in zip(self.levels[:-1], self.levels[1:]):
            if not np.array_equal(b // 2, a):
                raise AssertionError("hierarchy is not nested")

    def dump(self) -> str:
        out = []
        for lvl, assign in enumerate(self.levels):
            out.append(f"level {lvl}:")
            out += [f"{v} {int(p)}" for v, p in enumerate(assign)]
        return "\n".join(out) + "\n"


def build_hierarchy(graph: Graph, rng: np.random.Generator,
                    levels: int | None = None) -> PartitionHierarchy:
    """Nested bisection down to ``levels_needed(N)`` levels (or ``levels``)."""
    n = graph.n_vertices
    if n == 0:
        raise InvalidArgument("graph is empty")
    comps = graph.components()
    if len(comps) > 1:
        raise DisconnectedGraph([c[0] for c in comps])
    depth = levels_needed(n) if levels is None else int(levels)
    assign = np.zeros(n, dtype=np.int64)
    out = [assign.copy()]
    for lvl in range(depth):
        nxt = np.empty_like(assign)
        for part in range(2 ** lvl):
            members = np.flatnonzero(assign == part)
            left, right = mft_bisect(graph, members, rng, require_connected=False)
            nxt[list(left)] = 2 * part
            nxt[list(right)] = 2 * part + 1
        assign = nxt
        out.append(assign.copy())
    hierarchy = PartitionHierarchy(tuple(out))
    hierarchy.check_nested()
    return hierarchy
