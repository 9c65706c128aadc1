"""Space-filling-curve orderings of graph vertices.

The curve is built top-down through a nested partition hierarchy. At each
level the partitions form a small graph of their own, and the sequence of
partitions inherited from the level above is improved by sweeping a window
of two sibling pairs along it. Inside the window every combination of
swapping each pair is tried and kept when the number of graph edges needed
to walk the sequence does not go up.

Further curves for the same graph come from reweighting the edges by how far
apart their endpoints sit on the curves built so far, so that the next
partitioning prefers to cut the edges those curves already walk along.
"""

from __future__ import annotations

import itertools
import os
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DisconnectedGraph, InvalidArgument, MeshParseError, Unreachable
from .mesh_graph import Graph
from .partitioner import PartitionHierarchy, build_hierarchy

EXHAUSTIVE_LIMIT = 6


@dataclass(frozen=True, eq=False)
class SfcOrdering:
    """A bijection between vertices and curve positions."""

    to_vertex: np.ndarray

    def __post_init__(self):
        seq = np.asarray(self.to_vertex, dtype=np.int64)
        if seq.ndim != 1 or not np.array_equal(np.sort(seq), np.arange(seq.size)):
            raise InvalidArgument("ordering is not a permutation of 0..n-1")
        object.__setattr__(self, "to_vertex", seq)
        pos = np.empty_like(seq)
        pos[seq] = np.arange(seq.size)
        object.__setattr__(self, "_pos", pos)

    @classmethod
    def from_positions(cls, to_position) -> "SfcOrdering":
        pos = np.asarray(to_position, dtype=np.int64)
        if not np.array_equal(np.sort(pos), np.arange(pos.size)):
            raise InvalidArgument("positions are not a permutation of 0..n-1")
        seq = np.empty_like(pos)
        seq[pos] = np.arange(pos.size)
        return cls(seq)

    @property
    def to_position(self) -> np.ndarray:
        return self._pos

    @property
    def n(self) -> int:
        return int(self.to_vertex.size)

    def reversed(self) -> "SfcOrdering":
        return SfcOrdering(self.to_vertex[::-1].copy())

    def __eq__(self, other) -> bool:
        return isinstance(other, SfcOrdering) and np.array_equal(self.to_vertex, other.to_vertex)

    __hash__ = None


@dataclass(frozen=True)
class CoverageReport:
    total_edges: int
    covered_edges: int
    shared_edges: int
    uncovered_edges: int

    def as_row(self) -> tuple[int, int, int, int]:
        return (self.total_edges, self.covered_edges, self.shared_edges, self.uncovered_edges)


class HopCounter:
    """Unweighted shortest-path lengths with a per-instance memo."""

    def __init__(self, graph: Graph):
        self.graph = graph
        self._memo: dict[tuple[int, int], int] = {}

    def __call__(self, v: int, w: int) -> int:
        if v == w:
            return 0
        key = (v, w) if v < w else (w, v)
        hit = self._memo.get(key)
        if hit is None:
            hit = self._bfs(*key)
            self._memo[key] = hit
        return hit

    def _bfs(self, v: int, w: int) -> int:
        adj = self.graph.adjacency
        if w in adj[v]:
            return 1
        dist = {v: 0}
        queue = deque([v])
        while queue:
            u = queue.popleft()
            for x in adj[u]:
                if x not in dist:
                    if x == w:
                        return dist[u] + 1
                    dist[x] = dist[u] + 1
                    queue.append(x)
        raise Unreachable(f"vertex {w} is not reachable from {v}")


def hop_cost(graph: Graph, v: int, w: int) -> int:
    n = graph.n_vertices
    if not (0 <= v < n and 0 <= w < n):
        raise InvalidArgument(f"vertex out of range for a graph of {n} vertices")
    return HopCounter(graph)(int(v), int(w))


def path_cost(seq: Sequence[int], hops) -> int:
    return sum(hops(a, b) for a, b in zip(seq[:-1], seq[1:]))


def _default_groups(n: int) -> list[int]:
    return [2] * (n // 2) + [1] * (n % 2)


def window_sweep(level_sequence: Sequence[int], graph: Graph, fixed_prefix: int = 1,
                 fixed_suffix: int = 1, sweeps: int = 10,
                 groups: Sequence[int] | None = None, hops: HopCounter | None = None,
                 history: list | None = None, backward: bool = True) -> list[int]:
    """Reorder ``level_sequence`` by flipping sibling groups inside a moving window.

    ``groups`` gives the sizes (1 or 2) of the consecutive sibling groups
    making up the sequence; by default consecutive pairs are siblings. The
    window spans two groups and advances one group at a time, first forwards
    and then backwards (unless ``backward`` is off), ``sweeps`` times. Its functional is the hop count of
    the window extended by up to ``fixed_prefix`` fixed vertices before it and
    ``fixed_suffix`` after it. Flip combinations are visited in Gray-code order
    starting from the incumbent and each one scoring no worse than the last
    accepted one replaces it.
    """
    seq = [int(v) for v in level_sequence]
    groups = _default_groups(len(seq)) if groups is None else [int(g) for g in groups]
    if sum(groups) != len(seq) or any(g not in (1, 2) for g in groups):
        raise InvalidArgument("groups must be sizes 1 or 2 covering the sequence")
    hops = HopCounter(graph) if hops is None else hops
    if len(groups) < 2:
        if history is not None:
            history.extend([path_cost(seq, hops)] * sweeps)
        return seq
    starts = np.concatenate([[0], np.cumsum(groups)]).astype(int).tolist()
    # Gray order from the incumbent: flip first, flip second, unflip first
    gray = ((0, 0), (1, 0), (1, 1), (0, 1))

    def visit(g: int) -> None:
        lo, mid, hi = starts[g], starts[g + 1], starts[g + 2]
        a0, b0 = max(0, lo - fixed_prefix), min(len(seq), hi + fixed_suffix)
        head, tail = seq[a0:lo], seq[hi:b0]
        first, second = seq[lo:mid], seq[mid:hi]
        best, best_val = None, None
        for fa, fb in gray:
            if (fa and len(first) == 1) or (fb and len(second) == 1):
                continue
            cand = (first[::-1] if fa else first) + (second[::-1] if fb else second)
            val = path_cost(head + cand + tail, hops)
            if best_val is None or val <= best_val:
                best, best_val = cand, val
        seq[lo:hi] = best

    for _ in range(sweeps):
        for g in range(len(groups) - 1):
            visit(g)
        if backward:
            for g in range(len(groups) - 2, -1, -1):
                visit(g)
        if history is not None:
            history.append(path_cost(seq, hops))
    return seq


def _level_graph(graph: Graph, assign: np.ndarray, parts: Sequence[int]) -> Graph:
    local = {p: k for k, p in enumerate(parts)}
    edges: dict[tuple[int, int], float] = {}
    for i, j, _ in graph.edges():
        a, b = local[int(assign[i])], local[int(assign[j])]
        if a != b:
            key = (min(a, b), max(a, b))
            edges[key] = edges.get(key, 0.0) + 1.0
    keys = sorted(edges)
    return Graph.from_edges(len(parts), keys, [edges[k] for k in keys])


def _order_members(members: list[int], prev: int | None, following: list[int],
                   hops: HopCounter) -> list[int]:
    """Cheapest path through ``members`` linking ``prev`` to ``following``."""

    def cost(path):
        c = path_cost(path, hops)
        if prev is not None:
            c += hops(prev, path[0])
        if following:
            c += min(hops(path[-1], u) for u in following)
        return c

    if len(members) <= EXHAUSTIVE_LIMIT:
        best, best_c = None, None
        for perm in itertools.permutations(sorted(members)):
            c = cost(perm)
            if best_c is None or c < best_c:
                best, best_c = list(perm), c
        return best
    # greedy nearest neighbour start, then 2-opt descent
    left = sorted(members)
    cur = min(left, key=lambda u: (hops(prev, u), u)) if prev is not None else left[0]
    path = [cur]
    left.remove(cur)
    while left:
        cur = min(left, key=lambda u: (hops(path[-1], u), u))
        path.append(cur)
        left.remove(cur)
    best_c = cost(path)
    improved = True
    while improved:
        improved = False
        for i in range(len(path) - 1):
            for j in range(i + 1, len(path)):
                cand = path[:i] + path[i:j + 1][::-1] + path[j + 1:]
                c = cost(cand)
                if c < best_c:
                    path, best_c, improved = cand, c, True
    return path


def order_from_hierarchy(graph: Graph, hierarchy: PartitionHierarchy,
                         sweeps: int = 10, refine: bool = True) -> SfcOrdering:
    """Order the partitions level by level, then the vertices of each leaf.

    With ``refine`` the finished curve is polished by :func:`refine_blocks`.
    """
    seq = [0]
    for lvl in range(1, hierarchy.depth + 1):
        assign = hierarchy.levels[lvl]
        present = set(np.unique(assign).tolist())
        nxt, groups = [], []
        for p in seq:
            kids = [c for c in (2 * p, 2 * p + 1) if c in present]
            nxt += kids
            groups.append(len(kids))
        # a childless parent cannot occur: every nonempty partition has a nonempty child
        lg = _level_graph(graph, assign, nxt)
        local = window_sweep(range(len(nxt)), lg, 1, 1, sweeps, groups)
        seq = [nxt[k] for k in local]
    leaves = hierarchy.levels[-1]
    members = {p: [] for p in seq}
    for v, p in enumerate(leaves):
        members[int(p)].append(v)
    hops = HopCounter(graph)
    out: list[int] = []
    for k, p in enumerate(seq):
        group = members[p]
        if len(group) > 1:
            following = members[seq[k + 1]] if k + 1 < len(seq) else []
            group = _order_members(group, out[-1] if out else None, following, hops)
        out += group
    if refine:
        out = refine_blocks(out, hierarchy, hops)
    return SfcOrdering(np.array(out, dtype=np.int64))


def _runs(order: list[int], assign: np.ndarray) -> dict[int, tuple[int, int]]:
    runs: dict[int, list[int]] = {}
    for k, v in enumerate(order):
        c = int(assign[v])
        if c in runs:
            runs[c][1] = k + 1
        else:
            runs[c] = [k, k + 1]
    return {c: (r[0], r[1]) for c, r in runs.items()}


def refine_blocks(order: list[int], hierarchy: PartitionHierarchy, hops: HopCounter) -> list[int]:
    """Rearrange sibling runs of the finished curve while that lowers its cost.

    Every partition occupies a contiguous run of the curve. For each
    partition with two nonempty children, the eight arrangements obtained by
    swapping the two child runs and reversing either of them are scored by
    the hop cost at the three joints they touch, and a strictly cheaper one
    replaces the current one. Partitions stay contiguous, so the curve still
    follows the hierarchy.
    """
    order = list(order)
    n = len(order)
    improved = True
    while improved:
        improved = False
        for lvl in range(hierarchy.depth):
            fine = hierarchy.levels[lvl + 1]
            runs = _runs(order, fine)
            for parent in sorted(set(c // 2 for c in runs)):
                if 2 * parent not in runs or 2 * parent + 1 not in runs:
                    continue
                (x0, x1), (y0, y1) = sorted((runs[2 * parent], runs[2 * parent + 1]))
                xs, ys = order[x0:x1], order[y0:y1]
                prev = order[x0 - 1] if x0 > 0 else None
                nxt = order[y1] if y1 < n else None

                def joint_cost(first, second):
                    c = hops(first[-1], second[0])
                    if prev is not None:
                        c += hops(prev, first[0])
                    if nxt is not None:
                        c += hops(second[-1], nxt)
                    return c

                best, choice = joint_cost(xs, ys), None
                for first, second in ((xs, ys), (ys, xs)):
                    for f in (first, first[::-1]):
                        for t in (second, second[::-1]):
                            c = joint_cost(f, t)
                            if c < best:
                                best, choice = c, f + t
                if choice is not None:
                    order[x0:y1] = choice
                    runs = _runs(order, fine)
                    improved = True
    return order


def build_sfc(graph: Graph, rng: np.random.Generator, sweeps: int = 10,
              levels: int | None = None, refine: bool = True) -> SfcOrdering:
    """Partition ``graph`` hierarchically and order it into a curve.

    ``levels`` truncates the hierarchy, leaving multi-vertex leaves that are
    ordered by path search.
    """
    if graph.n_vertices == 0:
        raise InvalidArgument("graph is empty")
    hierarchy = build_hierarchy(graph, rng, levels=levels)
    return order_from_hierarchy(graph, hierarchy, sweeps, refine)


def sfc_total_cost(graph: Graph, ordering: SfcOrdering) -> int:
    if ordering.n != graph.n_vertices:
        raise InvalidArgument("ordering and graph sizes differ")
    return path_cost(ordering.to_vertex.tolist(), HopCounter(graph))


def reweight_for_next_sfc(graph: Graph, existing: Sequence[SfcOrdering],
                          gamma: float = 0.2) -> Graph:
    """Edge weight ``max_m |s_i^m - s_j^m| ** gamma`` over the existing curves."""
    if not existing:
        raise InvalidArgument("need at least one existing ordering")
    pos = np.stack([o.to_position for o in existing])

    def weight(i, j):
        return float(np.max(np.abs(pos[:, i] - pos[:, j])) ** gamma)

    return graph.with_weights(weight)


def build_multiple_sfcs(graph: Graph, m: int, rng: np.random.Generator,
                        sweeps: int = 10, gamma: float = 0.2) -> list[SfcOrdering]:
    if m < 1:
        raise InvalidArgument("m must be at least 1")
    current = graph.with_weights(lambda i, j: 1.0)
    out: list[SfcOrdering] = []
    for _ in range(m):
        out.append(build_sfc(current, rng, sweeps))
        current = reweight_for_next_sfc(graph, out, gamma)
    return out


def _edges_walked(graph: Graph, ordering: SfcOrdering) -> set[tuple[int, int]]:
    seq = ordering.to_vertex
    walked = set()
    for a, b in zip(seq[:-1].tolist(), seq[1:].tolist()):
        if graph.has_edge(a, b):
            walked.add((min(a, b), max(a, b)))
    return walked


def edge_coverage(graph: Graph, orderings: Sequence[SfcOrdering]) -> CoverageReport:
    """Count graph edges joining consecutive vertices of one or more curves."""
    if not orderings:
        raise InvalidArgument("need at least one ordering")
    counts: dict[tuple[int, int], int] = {}
    for o in orderings:
        for e in _edges_walked(graph, o):
            counts[e] = counts.get(e, 0) + 1
    covered = len(counts)
    shared = sum(1 for c in counts.values() if c >= 2)
    return CoverageReport(graph.n_edges, covered, shared, graph.n_edges - covered)


def _seeded_sfcs(args):
    graph, m, seed, sweeps, gamma = args
    orderings = build_multiple_sfcs(graph, m, np.random.default_rng(seed), sweeps, gamma)
    return seed, orderings


def default_workers() -> int:
    env = os.environ.get("CURVEWEAVE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def best_of_seeds(graph: Graph, seeds: Sequence[int], m: int = 1, sweeps: int = 10,
                  gamma: float = 0.2, workers: int | None = None) -> tuple[int, list[SfcOrdering]]:
    """Run independent seeds and keep the best result.

    One curve is ranked by total hop cost. Several are ranked by most edges
    covered, then fewest shared, then lowest summed cost. Ties go to the
    earliest seed, so the answer does not depend on ``workers``.
    """
    if not graph.is_connected():
        raise DisconnectedGraph([c[0] for c in graph.components()])
    workers = default_workers() if workers is None else max(1, workers)
    jobs = [(graph, m, int(s), sweeps, gamma) for s in seeds]
    if workers == 1 or len(jobs) == 1:
        results = [_seeded_sfcs(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_seeded_sfcs, jobs))

    def rank(item):
        _, orderings = item
        cost = sum(sfc_total_cost(graph, o) for o in orderings)
        if m == 1:
            return (cost,)
        rep = edge_coverage(graph, orderings)
        return (-rep.covered_edges, rep.shared_edges, cost)

    best = min(results, key=rank)
    return best


def format_ordering(ordering: SfcOrdering) -> str:
    lines = [f"sfc v1 {ordering.n}"] + [str(int(v)) for v in ordering.to_vertex]
    return "\n".join(lines) + "\n"


def save_ordering(ordering: SfcOrdering, path: str | Path) -> None:
    Path(path).write_text(format_ordering(ordering), encoding="utf-8")


def load_ordering(path: str | Path) -> SfcOrdering:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    head = lines[0].split() if lines else []
    if len(head) != 3 or head[:2] != ["sfc", "v1"] or not head[2].isdigit():
        raise MeshParseError("expected header 'sfc v1 <n>'", 1)
    n = int(head[2])
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != n:
        raise MeshParseError(f"expected {n} vertex lines, found {len(body)}", len(lines))
    try:
        seq = [int(ln) for ln in body]
    except ValueError as exc:
        raise MeshParseError(f"bad vertex index: {exc}", None) from None
    return SfcOrdering(np.array(seq, dtype=np.int64))


def format_coverage_csv(report: CoverageReport) -> str:
    return "total,covered,shared,uncovered\n" + ",".join(map(str, report.as_row())) + "\n"
