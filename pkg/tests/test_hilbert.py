import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curveweave.errors import InvalidArgument
from curveweave.hilbert import hilbert_ordering, hilbert_points, rotate_ordering
from curveweave.mesh_graph import build_grid_graph
from curveweave.sfc import sfc_total_cost


def test_level1_is_a_u():
    pts = [tuple(p) for p in hilbert_points(1).tolist()]
    assert pts == [(0, 0), (0, 1), (1, 1), (1, 0)]


@pytest.mark.parametrize("level", [1, 2, 3, 4])
def test_cost_is_all_unit_steps(level):
    side = 1 << level
    assert sfc_total_cost(build_grid_graph(side, side), hilbert_ordering(level)) == 4 ** level - 1


def test_level3_cost_63():
    assert sfc_total_cost(build_grid_graph(8, 8), hilbert_ordering(3)) == 63


def test_corners():
    pts = hilbert_points(4)
    assert tuple(pts[0]) == (0, 0) and tuple(pts[-1]) == (15, 0)


@given(st.integers(1, 5), st.integers(-8, 8))
def test_rotation_preserves_cost_and_bijection(level, turns):
    side = 1 << level
    g = build_grid_graph(side, side)
    r = rotate_ordering(hilbert_ordering(level), side, turns)
    assert np.array_equal(np.sort(r.to_vertex), np.arange(side * side))
    assert sfc_total_cost(g, r) == side * side - 1


def test_rotation_identities():
    h = hilbert_ordering(3)
    assert rotate_ordering(h, 8, 0) == h
    assert rotate_ordering(h, 8, 4) == h
    assert rotate_ordering(h, 8, 1) != h


def test_level_bounds():
    with pytest.raises(InvalidArgument):
        hilbert_ordering(0)
    with pytest.raises(InvalidArgument):
        hilbert_points(16)
