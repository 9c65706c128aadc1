import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import brute_force_bisection, random_connected_graph
from curveweave.errors import DisconnectedGraph, InvalidArgument
from curveweave.mesh_graph import Graph, build_grid_graph
from curveweave.partitioner import (MftState, anneal, build_hierarchy, compute_alpha, cut_weight,
                                    levels_needed, mft_bisect, rebalance)


def path(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


@pytest.mark.parametrize("n, levels", [(1, 0), (2, 1), (4, 2), (5, 3), (16384, 14)])
def test_levels_needed(n, levels):
    assert levels_needed(n) == levels


def test_alpha_examples():
    assert compute_alpha(path(3)) == pytest.approx(4 / 6)
    cycle = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    assert compute_alpha(cycle) == pytest.approx(1.0)
    assert compute_alpha(Graph.from_edges(1, [])) == 0.0


def test_bisect_path_is_unique_optimum(rng):
    left, right = mft_bisect(path(4), range(4), rng)
    assert {frozenset(left), frozenset(right)} == {frozenset({0, 1}), frozenset({2, 3})}


def test_bisect_k4(rng):
    k4 = Graph.from_edges(4, [(a, b) for a in range(4) for b in range(a + 1, 4)])
    left, right = mft_bisect(k4, range(4), rng)
    assert len(left) == len(right) == 2
    assert cut_weight(k4, left) == 4


def test_bisect_single_vertex(rng):
    assert mft_bisect(path(3), [2], rng) == ((2,), ())


def test_bisect_rejects_disconnected_subset(rng):
    with pytest.raises(DisconnectedGraph) as info:
        mft_bisect(path(5), [0, 1, 3, 4], rng)
    assert len(info.value.witnesses) == 2


def test_rebalance_examples():
    hard = MftState(np.array([[1, 0], [1, 0], [0, 1], [0, 1]], dtype=float))
    assert rebalance(hard, (2, 2)).tolist() == [0, 0, 1, 1]
    flat = MftState(np.full((4, 2), 0.5))
    assert np.bincount(rebalance(flat, (2, 2)), minlength=2).tolist() == [2, 2]
    p = np.array([0.9, 0.6, 0.1])
    assert rebalance(MftState(np.stack([p, 1 - p], axis=1)), (2, 1)).tolist() == [0, 0, 1]
    # all mass on partition 0: the least likely member moves
    p = np.array([0.9, 0.8, 0.7])
    assert rebalance(MftState(np.stack([p, 1 - p], axis=1)), (2, 1)).tolist() == [0, 0, 1]


def test_rebalance_bad_targets():
    with pytest.raises(InvalidArgument):
        rebalance(MftState(np.full((3, 2), 0.5)), (2, 2))


def test_mft_state_invariants():
    with pytest.raises(InvalidArgument):
        MftState(np.array([[0.7, 0.7]]))


def test_anneal_rows_sum_to_one(rng):
    g = build_grid_graph(4, 4)
    nbr = [list(g.neighbors(i)) for i in range(16)]
    wts = [list(g.neighbor_weights(i)) for i in range(16)]
    trace = []
    state = anneal(nbr, wts, compute_alpha(g), rng, trace)
    for z in trace + [state.z]:
        assert np.all((z >= 0) & (z <= 1))
        assert np.allclose(z.sum(axis=1), 1.0, atol=1e-12)


@given(st.integers(2, 11), st.floats(0.0, 0.6), st.integers(0, 2**32 - 1))
def test_bisection_balanced_and_within_twice_optimum(n, extra, seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, n, extra)
    left, right = mft_bisect(g, range(n), rng)
    assert abs(len(left) - len(right)) <= 1
    assert sorted(left + right) == list(range(n))
    assert cut_weight(g, left) <= 2 * brute_force_bisection(g)


@pytest.mark.parametrize("n", [8, 32])
def test_grid_cuts_are_optimal(n):
    g = build_grid_graph(n, n)
    left, _ = mft_bisect(g, range(n * n), np.random.default_rng(0))
    assert cut_weight(g, left) == n


def test_hierarchy_path():
    h = build_hierarchy(path(4), np.random.default_rng(0))
    assert h.depth == 2
    assert sorted(np.bincount(h.levels[2]).tolist()) == [1, 1, 1, 1]


def test_hierarchy_grid_singletons():
    h = build_hierarchy(build_grid_graph(8, 8), np.random.default_rng(0))
    assert h.depth == 6
    assert np.array_equal(np.sort(h.levels[-1]), np.arange(64))
    h.check_nested()


def test_hierarchy_single_vertex():
    h = build_hierarchy(Graph.from_edges(1, []), np.random.default_rng(0))
    assert h.depth == 0 and h.levels[0].tolist() == [0]


def test_hierarchy_rejects_disconnected():
    with pytest.raises(DisconnectedGraph):
        build_hierarchy(Graph.from_edges(4, [(0, 1), (2, 3)]), np.random.default_rng(0))


@given(st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_hierarchy_nested_and_balanced(n, seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, n, 0.2)
    h = build_hierarchy(g, rng)
    h.check_nested()
    for lvl in range(h.depth):
        for part in range(2 ** lvl):
            size_l = len(h.members(lvl + 1, 2 * part))
            size_r = len(h.members(lvl + 1, 2 * part + 1))
            assert abs(size_l - size_r) <= 1
            assert size_l + size_r == len(h.members(lvl, part))


def test_hierarchy_levels_cap_leaves_multi_vertex_parts():
    h = build_hierarchy(build_grid_graph(4, 4), np.random.default_rng(0), levels=2)
    assert h.multi_vertex_partitions() == 4


def test_hierarchy_dump_format():
    text = build_hierarchy(path(2), np.random.default_rng(0)).dump()
    lines = text.splitlines()
    assert lines[0] == "level 0:" and lines[3] == "level 1:"
