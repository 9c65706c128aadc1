import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_connected_graph
from curveweave.errors import InvalidArgument, MeshParseError, Unreachable
from curveweave.mesh_graph import Graph, build_grid_graph
from curveweave.sfc import (CoverageReport, HopCounter, SfcOrdering, best_of_seeds, build_multiple_sfcs,
                            build_sfc, edge_coverage, format_coverage_csv, hop_cost, load_ordering,
                            path_cost, reweight_for_next_sfc, save_ordering, sfc_total_cost,
                            window_sweep)

# the worked level-2 example, vertices renumbered from 0
FIG4 = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (1, 3), (3, 0)])


def snake(n):
    rows = [list(range(y * n, y * n + n)) for y in range(n)]
    return SfcOrdering(np.array(sum((r if y % 2 == 0 else r[::-1] for y, r in enumerate(rows)), [])))


def test_ordering_bijection():
    o = SfcOrdering(np.array([2, 0, 1]))
    assert o.to_position.tolist() == [1, 2, 0]
    assert SfcOrdering.from_positions(o.to_position) == o
    with pytest.raises(InvalidArgument):
        SfcOrdering(np.array([0, 0, 1]))


def test_hop_cost_examples():
    p = Graph.from_edges(3, [(0, 1), (1, 2)])
    assert hop_cost(p, 0, 2) == 2
    assert hop_cost(p, 1, 1) == 0
    g = build_grid_graph(8, 8)
    assert hop_cost(g, 0, 9) == 2
    with pytest.raises(Unreachable):
        hop_cost(Graph.from_edges(2, []), 0, 1)


def test_level2_table_costs():
    hops = HopCounter(FIG4)
    table = {(0, 1, 2, 3): 3, (1, 0, 2, 3): 4, (1, 0, 3, 2): 3, (0, 1, 3, 2): 3}
    for seq, cost in table.items():
        assert path_cost(seq, hops) == cost


def test_level2_table_forward_pass():
    # (1,0,2,3) costs 4 and is rejected; the last tie (0,1,3,2) is kept
    out = window_sweep([0, 1, 2, 3], FIG4, sweeps=1, backward=False)
    assert out == [0, 1, 3, 2]


def test_path_sequence_unchanged():
    g = build_grid_graph(4, 1)
    assert path_cost(window_sweep([0, 1, 2, 3], g), HopCounter(g)) == 3


@given(st.integers(2, 16), st.integers(0, 2**32 - 1))
def test_window_sweep_monotone(n, seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, n, 0.15)
    seq = rng.permutation(n).tolist()
    hops = HopCounter(g)
    history = []
    out = window_sweep(seq, g, sweeps=4, hops=hops, history=history)
    assert sorted(out) == sorted(seq)
    costs = [path_cost(seq, hops)] + history
    assert all(b <= a for a, b in zip(costs, costs[1:]))
    assert path_cost(out, hops) == history[-1]


def test_window_sweep_group_validation():
    with pytest.raises(InvalidArgument):
        window_sweep([0, 1, 2], FIG4, groups=[3])


def test_build_sfc_small_cases():
    assert sfc_total_cost(build_grid_graph(2, 2), build_sfc(build_grid_graph(2, 2), np.random.default_rng(0))) == 3
    single = build_sfc(Graph.from_edges(1, []), np.random.default_rng(0))
    assert single.to_vertex.tolist() == [0]


@given(st.integers(1, 24), st.integers(0, 2**32 - 1))
def test_build_sfc_bijection(n, seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, n, 0.1)
    o = build_sfc(g, rng)
    assert np.array_equal(np.sort(o.to_vertex), np.arange(n))
    assert sfc_total_cost(g, o) >= n - 1


def test_refine_flag_keeps_bijection():
    g = build_grid_graph(6, 6)
    o = build_sfc(g, np.random.default_rng(3), refine=False)
    assert o.n == 36


def test_levels_cap_uses_leaf_search():
    g = build_grid_graph(6, 6)
    o = build_sfc(g, np.random.default_rng(0), levels=2)
    assert o.n == 36 and sfc_total_cost(g, o) >= 35


def test_costs_of_simple_curves():
    g = build_grid_graph(4, 4)
    assert sfc_total_cost(g, snake(4)) == 15
    assert sfc_total_cost(g, snake(4).reversed()) == 15


def test_small_graphs_near_optimal():
    # every 5-vertex connected graph: within 1 of the brute-force optimum
    for seed in range(20):
        rng = np.random.default_rng(seed)
        g = random_connected_graph(rng, 5, 0.3)
        hops = HopCounter(g)
        opt = min(path_cost(p, hops) for p in itertools.permutations(range(5)))
        _, (o,) = best_of_seeds(g, range(8), workers=1)
        assert sfc_total_cost(g, o) <= opt + 1


def test_reweight_examples():
    g = build_grid_graph(8, 8)
    first = snake(8)
    w = reweight_for_next_sfc(g, [first])
    assert w.weight(0, 1) == pytest.approx(1.0)
    # vertices 0 and 8 sit 15 positions apart on the snake
    assert w.weight(0, 8) == pytest.approx(15 ** 0.2)
    line = Graph.from_edges(33, [(0, 32)] + [(i, i + 1) for i in range(32)])
    near = SfcOrdering(np.arange(33))
    far_pos = np.arange(33)
    far_pos[[1, 32]] = far_pos[[32, 1]]
    w2 = reweight_for_next_sfc(line, [near])
    assert w2.weight(0, 32) == pytest.approx(2.0)
    w3 = reweight_for_next_sfc(line, [SfcOrdering.from_positions(far_pos), near])
    assert w3.weight(0, 1) == pytest.approx(2.0)


def test_multiple_sfcs_first_equals_single():
    g = build_grid_graph(4, 4)
    (only,) = build_multiple_sfcs(g, 1, np.random.default_rng(5))
    assert only == build_sfc(g, np.random.default_rng(5))


def test_multiple_sfcs_are_orderings():
    for o in build_multiple_sfcs(build_grid_graph(4, 4), 3, np.random.default_rng(0)):
        assert np.array_equal(np.sort(o.to_vertex), np.arange(16))


def test_edge_coverage_examples():
    g = build_grid_graph(4, 4)
    s = snake(4)
    assert edge_coverage(g, [s]) == CoverageReport(24, 15, 0, 9)
    rep = edge_coverage(g, [s, s])
    assert rep.shared_edges == rep.covered_edges == 15
    assert format_coverage_csv(rep) == "total,covered,shared,uncovered\n24,15,15,9\n"


def test_best_of_seeds_independent_of_workers():
    g = build_grid_graph(4, 4)
    a = best_of_seeds(g, range(4), m=2, workers=1)
    b = best_of_seeds(g, range(4), m=2, workers=2)
    assert a[0] == b[0] and all(x == y for x, y in zip(a[1], b[1]))


def test_ordering_io(tmp_path):
    o = SfcOrdering(np.random.default_rng(0).permutation(20))
    p = tmp_path / "o.txt"
    save_ordering(o, p)
    assert load_ordering(p) == o


@pytest.mark.parametrize("text", ["", "sfc v2 2\n0\n1\n", "sfc v1 3\n0\n1\n", "sfc v1 2\n0\nx\n"])
def test_ordering_parse_errors(tmp_path, text):
    p = tmp_path / "o.txt"
    p.write_text(text)
    with pytest.raises(MeshParseError):
        load_ordering(p)
