import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from curveweave.mesh_graph import Graph

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def brute_force_bisection(graph: Graph) -> float:
    """Minimum cut weight over all splits with sizes differing by at most one."""
    n = graph.n_vertices
    edges = list(graph.edges())
    best = float("inf")
    for left in itertools.combinations(range(n), n // 2):
        s = set(left)
        cut = sum(w for i, j, w in edges if (i in s) != (j in s))
        best = min(best, cut)
    return best


def random_connected_graph(rng: np.random.Generator, n: int, extra: float) -> Graph:
    """Random spanning tree plus each remaining pair with probability ``extra``."""
    order = rng.permutation(n)
    edges = {(min(a, b), max(a, b)) for a, b in
             ((int(order[k]), int(order[rng.integers(0, k)])) for k in range(1, n))}
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < extra:
                edges.add((a, b))
    return Graph.from_edges(n, sorted(edges))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
