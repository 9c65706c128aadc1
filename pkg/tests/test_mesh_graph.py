import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curveweave.errors import (IndexOutOfRange, InvalidArgument, InvalidMesh, MeshParseError,
                               UnknownDiscretization)
from curveweave.mesh_graph import (Graph, Mesh, build_cg_graph, build_dg_graph, build_grid_graph,
                                   dg_from_cg, format_graph, load_graph, load_mesh, save_graph,
                                   save_mesh, structured_triangulation)


@pytest.mark.parametrize("n, vertices, edges", [(2, 4, 4), (4, 16, 24), (8, 64, 112)])
def test_grid_counts(n, vertices, edges):
    g = build_grid_graph(n, n)
    assert (g.n_vertices, g.n_edges) == (vertices, edges)


@given(st.integers(1, 12), st.integers(1, 12))
def test_grid_edge_formula_and_symmetry(nx, ny):
    g = build_grid_graph(nx, ny)
    assert g.n_edges == nx * (ny - 1) + ny * (nx - 1)
    for i in range(g.n_vertices):
        nb = g.neighbors(i)
        assert i not in nb
        assert len(set(nb)) == len(nb)
        assert all(i in g.neighbors(j) for j in nb)
    assert g.is_connected()


def test_grid_row_major():
    g = build_grid_graph(3, 2)
    assert g.has_edge(0, 1) and g.has_edge(0, 3) and not g.has_edge(2, 3)


def test_grid_rejects_zero():
    with pytest.raises(InvalidArgument):
        build_grid_graph(0, 3)


TRIANGLE = Mesh(np.array([[0, 0], [1, 0], [0, 1]]), np.array([[0, 1, 2]]), "cg_p1")
TWO = Mesh(np.array([[0, 0], [1, 0], [0, 1], [1, 1]]), np.array([[0, 1, 2], [1, 3, 2]]), "cg_p1")


def test_cg_counts():
    assert (build_cg_graph(TRIANGLE).n_vertices, build_cg_graph(TRIANGLE).n_edges) == (3, 3)
    g = build_cg_graph(TWO)
    assert (g.n_vertices, g.n_edges) == (4, 5)
    g = build_cg_graph(structured_triangulation(3, 3))
    assert (g.n_vertices, g.n_edges) == (9, 16)


def test_dg_counts():
    g = build_dg_graph(dg_from_cg(TRIANGLE))
    assert (g.n_vertices, g.n_edges) == (3, 3)
    g = build_dg_graph(dg_from_cg(TWO))
    assert (g.n_vertices, g.n_edges) == (6, 15)


def test_dg_three_neighbours_degree_eleven():
    nodes = np.array([[0, 0], [2, 0], [1, 2], [1, -1], [2.5, 1.5], [-0.5, 1.5]], dtype=float)
    elements = np.array([[0, 1, 2], [0, 3, 1], [1, 4, 2], [2, 5, 0]])
    dg = dg_from_cg(Mesh(nodes, elements, "cg_p1"))
    g = build_dg_graph(dg)
    centre = [g.degree(int(v)) for v in dg.elements[0]]
    assert centre == [11, 11, 11]


def test_dg_requires_three_local_nodes():
    with pytest.raises(InvalidMesh):
        Mesh(np.zeros((4, 2)), np.array([[0, 1, 2]]), "dg_p1")


def test_load_minimal_mesh(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("mesh v1 cg_p1 3 1\n0 0\n1 0\n0 1\n0 1 2\n")
    m = load_mesh(p)
    assert (m.n_nodes, m.n_elements) == (3, 1)


def test_load_bad_index(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("mesh v1 cg_p1 3 1\n0 0\n1 0\n0 1\n0 1 99\n")
    with pytest.raises(IndexOutOfRange) as info:
        load_mesh(p)
    assert info.value.line == 5


def test_load_unknown_tag(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("mesh v1 q2 3 1\n0 0\n1 0\n0 1\n0 1 2\n")
    with pytest.raises(UnknownDiscretization):
        load_mesh(p)


def test_load_dg_two_elements(tmp_path):
    p = tmp_path / "m.txt"
    save_mesh(dg_from_cg(TWO), p)
    assert build_dg_graph(load_mesh(p)).n_vertices == 6


def test_mesh_round_trip(tmp_path):
    p = tmp_path / "m.txt"
    m = structured_triangulation(4, 3)
    save_mesh(m, p)
    back = load_mesh(p)
    assert np.array_equal(back.nodes, m.nodes) and np.array_equal(back.elements, m.elements)


def test_graph_round_trip(tmp_path):
    g = build_grid_graph(5, 4).with_weights(lambda i, j: 0.5 + i * 0.1)
    p = tmp_path / "g.txt"
    save_graph(g, p)
    assert load_graph(p) == g
    assert format_graph(load_graph(p)) == format_graph(g)


@pytest.mark.parametrize("text", [
    "", "graph v2 3 1\n0 1 1.0\n", "graph v1 3 2\n0 1 1.0\n", "graph v1 3 1\n0 1\n",
    "graph v1 3 1\n0 x 1.0\n", "graph v1 3 1\n0 0 1.0\n",
])
def test_graph_parse_errors(tmp_path, text):
    p = tmp_path / "g.txt"
    p.write_text(text)
    with pytest.raises(MeshParseError):
        load_graph(p)


def test_components_witnesses():
    g = Graph.from_edges(5, [(0, 1), (2, 3)])
    comps = g.components()
    assert sorted(map(sorted, comps)) == [[0, 1], [2, 3], [4]]
    assert not g.is_connected()
