"""Meshes, stencil graphs, and their text file formats.

A :class:`Graph` is the substrate for partitioning and ordering. It is built
from a structured grid (five-point stencil) or from a triangle mesh under a
continuous (``cg_p1``) or discontinuous (``dg_p1``) linear discretisation.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    IndexOutOfRange,
    InvalidArgument,
    InvalidMesh,
    MeshParseError,
    UnknownDiscretization,
)

DISCRETIZATIONS = ("grid5", "cg_p1", "dg_p1")


@dataclass(frozen=True)
class Mesh:
    """Triangle mesh in 2D.

    For ``dg_p1`` the nodes are element-local: element ``k`` owns three
    distinct node indices and nodes at shared geometric locations are
    duplicated. ``geometric`` then holds, per element, the ids of the
    underlying geometric vertices, which is what side matching uses.
    """

    nodes: np.ndarray
    elements: np.ndarray
    discretization: str
    geometric: np.ndarray | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 2)
        elements = np.asarray(self.elements, dtype=np.int64).reshape(-1, 3)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        if self.discretization not in DISCRETIZATIONS:
            raise InvalidArgument(f"unknown discretization {self.discretization!r}")
        if elements.size and (elements.min() < 0 or elements.max() >= len(nodes)):
            raise InvalidMesh("element references a node index out of range")
        if self.discretization == "dg_p1":
            if len(nodes) != 3 * len(elements):
                raise InvalidMesh(
                    f"dg_p1 needs 3 nodes per element: {len(nodes)} nodes, "
                    f"{len(elements)} elements"
                )
            if np.unique(elements).size != elements.size:
                raise InvalidMesh("dg_p1 elements must not share nodes")
            geometric = self.geometric
            if geometric is None:
                geometric = _geometric_ids_from_coordinates(nodes, elements)
            geometric = np.asarray(geometric, dtype=np.int64).reshape(-1, 3)
            if geometric.shape != elements.shape:
                raise InvalidMesh("geometric ids must be given per element corner")
            object.__setattr__(self, "geometric", geometric)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)


def _geometric_ids_from_coordinates(nodes: np.ndarray, elements: np.ndarray) -> np.ndarray:
    # exact equality of parsed coordinates, no tolerance
    ids: dict[tuple[float, float], int] = {}
    out = np.empty_like(elements)
    for k, tri in enumerate(elements):
        for c, n in enumerate(tri):
            key = (float(nodes[n, 0]), float(nodes[n, 1]))
            out[k, c] = ids.setdefault(key, len(ids))
    return out


def dg_from_cg(mesh: Mesh) -> Mesh:
    """Duplicate the nodes of a continuous mesh into element-local DG nodes."""
    elements = np.arange(3 * mesh.n_elements).reshape(-1, 3)
    nodes = mesh.nodes[mesh.elements.ravel()]
    return Mesh(nodes, elements, "dg_p1", geometric=mesh.elements.copy())


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected weighted graph in CSR form.

    Neighbour lists are sorted ascending; ``weights`` is aligned with
    ``indices`` and symmetric.
    """

    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    _adj: tuple = field(default=(), repr=False)

    @classmethod
    def from_edges(cls, n_vertices: int, edges: Iterable[tuple[int, int]],
                   weights: Iterable[float] | None = None) -> "Graph":
        """Build from undirected edges; duplicates collapse (last weight wins)."""
        if n_vertices < 0:
            raise InvalidArgument("vertex count must be non-negative")
        edges = list(edges)
        wlist = [1.0] * len(edges) if weights is None else [float(w) for w in weights]
        if len(wlist) != len(edges):
            raise InvalidArgument("one weight per edge required")
        table: dict[tuple[int, int], float] = {}
        for (a, b), w in zip(edges, wlist):
            a, b = int(a), int(b)
            if a == b:
                raise InvalidArgument(f"self-loop at vertex {a}")
            if not (0 <= a < n_vertices and 0 <= b < n_vertices):
                raise InvalidArgument(f"edge ({a}, {b}) out of range")
            if w < 0:
                raise InvalidArgument("edge weights must be non-negative")
            table[(min(a, b), max(a, b))] = w
        nbrs: list[list[tuple[int, float]]] = [[] for _ in range(n_vertices)]
        for (a, b), w in table.items():
            nbrs[a].append((b, w))
            nbrs[b].append((a, w))
        indptr = np.zeros(n_vertices + 1, dtype=np.int64)
        indices, wts = [], []
        for i, lst in enumerate(nbrs):
            lst.sort()
            indptr[i + 1] = indptr[i] + len(lst)
            indices.extend(j for j, _ in lst)
            wts.extend(w for _, w in lst)
        return cls(indptr, np.asarray(indices, dtype=np.int64), np.asarray(wts, dtype=float))

    def __post_init__(self):
        for name in ("indptr", "indices", "weights"):
            getattr(self, name).setflags(write=False)
        adj = tuple(
            tuple(int(j) for j in self.indices[self.indptr[i]:self.indptr[i + 1]])
            for i in range(self.n_vertices)
        )
        object.__setattr__(self, "_adj", adj)

    @property
    def n_vertices(self) -> int:
        return len(self.indptr) - 1

    @property
    def n_edges(self) -> int:
        return len(self.indices) // 2

    @property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        return self._adj

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._adj[i]

    def neighbor_weights(self, i: int) -> np.ndarray:
        return self.weights[self.indptr[i]:self.indptr[i + 1]]

    def degree(self, i: int) -> int:
        return len(self._adj[i])

    def edges(self) -> Iterator[tuple[int, int, float]]:
        """Yield ``(i, j, w)`` once per undirected edge, with ``i < j``."""
        for i in range(self.n_vertices):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            for j, w in zip(self.indices[lo:hi], self.weights[lo:hi]):
                if i < j:
                    yield i, int(j), float(w)

    def weight(self, i: int, j: int) -> float:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        k = np.searchsorted(self.indices[lo:hi], j)
        if k < hi - lo and self.indices[lo + k] == j:
            return float(self.weights[lo + k])
        return 0.0

    def has_edge(self, i: int, j: int) -> bool:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        k = np.searchsorted(self.indices[lo:hi], j)
        return bool(k < hi - lo and self.indices[lo + k] == j)

    def with_weights(self, weight_of) -> "Graph":
        """Same adjacency, weights from ``weight_of(i, j)`` per undirected edge."""
        edges = [(i, j) for i, j, _ in self.edges()]
        return Graph.from_edges(self.n_vertices, edges, [weight_of(i, j) for i, j in edges])

    def components(self, subset: Sequence[int] | None = None) -> list[list[int]]:
        """Connected components of the subgraph induced by ``subset``."""
        verts = range(self.n_vertices) if subset is None else subset
        inside = set(int(v) for v in verts)
        seen: set[int] = set()
        comps = []
        for s in sorted(inside):
            if s in seen:
                continue
            comp = [s]
            seen.add(s)
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for w in self._adj[u]:
                    if w in inside and w not in seen:
                        seen.add(w)
                        comp.append(w)
                        queue.append(w)
            comps.append(sorted(comp))
        return comps

    def is_connected(self) -> bool:
        return self.n_vertices <= 1 or len(self.components()) == 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None


def build_grid_graph(nx: int, ny: int) -> Graph:
    """Five-point stencil graph of an ``nx`` by ``ny`` grid, row-major ids."""
    if nx < 1 or ny < 1:
        raise InvalidArgument(f"grid dimensions must be positive, got ({nx}, {ny})")
    edges = []
    for y in range(ny):
        for x in range(nx):
            i = y * nx + x
            if x + 1 < nx:
                edges.append((i, i + 1))
            if y + 1 < ny:
                edges.append((i, i + nx))
    return Graph.from_edges(nx * ny, edges)


def grid_coordinates(nx: int, ny: int) -> np.ndarray:
    """``(x, y)`` integer coordinates of row-major grid vertices."""
    ys, xs = np.divmod(np.arange(nx * ny), nx)
    return np.stack([xs, ys], axis=1)


def _check_nondegenerate(mesh: Mesh) -> None:
    for k, (a, b, c) in enumerate(mesh.elements):
        if a == b or b == c or a == c:
            raise InvalidMesh(f"element {k} is degenerate: nodes {(int(a), int(b), int(c))}")


def build_cg_graph(mesh: Mesh) -> Graph:
    """One vertex per node, one edge per element side."""
    if mesh.discretization != "cg_p1":
        raise InvalidArgument(f"expected a cg_p1 mesh, got {mesh.discretization}")
    _check_nondegenerate(mesh)
    edges = []
    for a, b, c in mesh.elements:
        edges += [(a, b), (b, c), (a, c)]
    return Graph.from_edges(mesh.n_nodes, edges)


def _side_neighbours(geometric: np.ndarray) -> list[list[int]]:
    sides: dict[tuple[int, int], list[int]] = {}
    for k, (a, b, c) in enumerate(geometric):
        for s in ((a, b), (b, c), (a, c)):
            sides.setdefault((int(min(s)), int(max(s))), []).append(k)
    nbrs: list[list[int]] = [[] for _ in range(len(geometric))]
    for side, owners in sides.items():
        if len(owners) > 2:
            raise InvalidMesh(f"non-manifold side {side} shared by elements {owners}")
        if len(owners) == 2:
            p, q = owners
            nbrs[p].append(q)
            nbrs[q].append(p)
    return nbrs


def build_dg_graph(mesh: Mesh) -> Graph:
    """Discontinuous Galerkin stencil graph.

    A node of element ``k`` couples to the other nodes of ``k`` and to every
    node of each element sharing a side with ``k``. Elements touching only at
    a corner are not coupled.
    """
    if mesh.discretization != "dg_p1":
        raise InvalidArgument(f"expected a dg_p1 mesh, got {mesh.discretization}")
    if len(np.unique(mesh.geometric.ravel())) and any(
        len(set(map(int, t))) < 3 for t in mesh.geometric
    ):
        raise InvalidMesh("degenerate element in geometric triangulation")
    nbrs = _side_neighbours(mesh.geometric)
    edges = set()
    for k, tri in enumerate(mesh.elements):
        local = [int(n) for n in tri]
        for i in range(3):
            for j in range(i + 1, 3):
                edges.add((min(local[i], local[j]), max(local[i], local[j])))
        for q in nbrs[k]:
            if q < k:
                continue
            for a in local:
                for b in mesh.elements[q]:
                    b = int(b)
                    edges.add((min(a, b), max(a, b)))
    return Graph.from_edges(mesh.n_nodes, sorted(edges))


def build_graph(mesh: Mesh) -> Graph:
    if mesh.discretization == "cg_p1":
        return build_cg_graph(mesh)
    if mesh.discretization == "dg_p1":
        return build_dg_graph(mesh)
    raise InvalidArgument("grid5 meshes are built with build_grid_graph")


def structured_triangulation(nx: int, ny: int) -> Mesh:
    """Split each cell of an ``nx`` by ``ny`` node grid into two triangles."""
    nodes = grid_coordinates(nx, ny).astype(float)
    elements = []
    for y in range(ny - 1):
        for x in range(nx - 1):
            a = y * nx + x
            b, c, d = a + 1, a + nx, a + nx + 1
            elements += [(a, b, d), (a, d, c)]
    return Mesh(nodes, np.asarray(elements).reshape(-1, 3), "cg_p1")


# -- file formats -----------------------------------------------------------

def load_mesh(path: str | Path) -> Mesh:
    """Parse a ``mesh v1`` file.

    Element lines carry three node indices; ``dg_p1`` element lines may carry
    three more integers giving the geometric vertex ids of the corners.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise MeshParseError("empty file", 1)
    head = lines[0].split()
    if len(head) != 5 or head[0] != "mesh" or head[1] != "v1":
        raise MeshParseError("expected header 'mesh v1 <discretization> <n_nodes> <n_elements>'", 1)
    disc = head[2]
    if disc not in DISCRETIZATIONS:
        raise UnknownDiscretization(f"unknown discretization tag {disc!r}", 1)
    try:
        n_nodes, n_elem = int(head[3]), int(head[4])
    except ValueError:
        raise MeshParseError("node and element counts must be integers", 1) from None
    if n_nodes < 0 or n_elem < 0:
        raise MeshParseError("counts must be non-negative", 1)
    if len(lines) < 1 + n_nodes + n_elem:
        raise MeshParseError(
            f"expected {n_nodes} node and {n_elem} element lines, file ends early",
            len(lines) + 1,
        )
    nodes = np.empty((n_nodes, 2))
    for k in range(n_nodes):
        lineno = 2 + k
        parts = lines[lineno - 1].split()
        if len(parts) != 2:
            raise MeshParseError("node line needs 'x y'", lineno)
        try:
            nodes[k] = [float(parts[0]), float(parts[1])]
        except ValueError:
            raise MeshParseError(f"bad coordinate in {lines[lineno - 1]!r}", lineno) from None
    elements = np.empty((n_elem, 3), dtype=np.int64)
    geometric = [] if disc == "dg_p1" else None
    for k in range(n_elem):
        lineno = 2 + n_nodes + k
        parts = lines[lineno - 1].split()
        allowed = (3, 6) if disc == "dg_p1" else (3,)
        if len(parts) not in allowed:
            raise MeshParseError("element line needs 'i j k'", lineno)
        try:
            vals = [int(p) for p in parts]
        except ValueError:
            raise MeshParseError(f"bad index in {lines[lineno - 1]!r}", lineno) from None
        for v in vals[:3]:
            if not 0 <= v < n_nodes:
                raise IndexOutOfRange(f"node index {v} out of range [0, {n_nodes})", lineno)
        elements[k] = vals[:3]
        if geometric is not None and len(vals) == 6:
            geometric.append(vals[3:])
    for lineno in range(2 + n_nodes + n_elem, len(lines) + 1):
        if lines[lineno - 1].strip():
            raise MeshParseError("trailing content after element lines", lineno)
    if geometric is not None and 0 < len(geometric) < n_elem:
        raise MeshParseError("geometric ids must be given for all elements or none", 2 + n_nodes)
    try:
        return Mesh(nodes, elements, disc, geometric=geometric or None)
    except (InvalidMesh, InvalidArgument) as exc:
        raise MeshParseError(str(exc)) from exc


def save_mesh(mesh: Mesh, path: str | Path) -> None:
    out = [f"mesh v1 {mesh.discretization} {mesh.n_nodes} {mesh.n_elements}"]
    out += [f"{x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    for k, tri in enumerate(mesh.elements.tolist()):
        line = " ".join(map(str, tri))
        if mesh.discretization == "dg_p1":
            line += " " + " ".join(map(str, mesh.geometric[k].tolist()))
        out.append(line)
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def format_graph(graph: Graph) -> str:
    lines = [f"graph v1 {graph.n_vertices} {graph.n_edges}"]
    lines += [f"{i} {j} {w!r}" for i, j, w in graph.edges()]
    return "\n".join(lines) + "\n"


def save_graph(graph: Graph, path: str | Path) -> None:
    Path(path).write_text(format_graph(graph), encoding="utf-8")


def load_graph(path: str | Path) -> Graph:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    head = lines[0].split() if lines else []
    if len(head) != 4 or head[:2] != ["graph", "v1"]:
        raise MeshParseError("expected header 'graph v1 <n_vertices> <n_edges>'", 1)
    try:
        n, m = int(head[2]), int(head[3])
    except ValueError:
        raise MeshParseError("vertex and edge counts must be integers", 1) from None
    if len(lines) < 1 + m:
        raise MeshParseError(f"expected {m} edge lines, file ends early", len(lines) + 1)
    edges, weights = [], []
    for lineno in range(2, 2 + m):
        parts = lines[lineno - 1].split()
        if len(parts) != 3:
            raise MeshParseError("edge line needs 'i j w'", lineno)
        try:
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise MeshParseError(f"bad edge line {lines[lineno - 1]!r}", lineno) from None
        if not (0 <= i < n and 0 <= j < n):
            raise IndexOutOfRange(f"edge ({i}, {j}) out of range", lineno)
        edges.append((i, j))
        weights.append(w)
    try:
        return Graph.from_edges(n, edges, weights)
    except InvalidArgument as exc:
        raise MeshParseError(str(exc)) from exc
