"""Mesh generation, slit insertion, validation and file round-trips."""

import numpy as np
import pytest

from pffrac.mesh import (GEOM_TOL, Mesh, MeshError, SlitSpec,
                         generate_unit_square_mesh, insert_slit, load_mesh,
                         notched_unit_square, validate_mesh, write_mesh)


def test_unit_square_counts():
    m = generate_unit_square_mesh(4)
    assert m.n_nodes == 25
    assert m.n_cells == 16
    assert len(m.boundary_facets) == 16


def test_unit_square_rectangular():
    m = generate_unit_square_mesh(3, 2)
    assert m.n_nodes == 12
    assert m.n_cells == 6
    # still the unit square, just anisotropic cells
    assert m.nodes[:, 0].max() == 1.0 and m.nodes[:, 1].max() == 1.0


def test_cell_diameter_uniform():
    m = generate_unit_square_mesh(8)
    assert np.isclose(m.h, np.sqrt(2.0) / 8.0, rtol=0, atol=1e-15)


def test_refinement_series_counts():
    for r in (3, 4, 5):
        n = 2 * 2 ** r
        m = generate_unit_square_mesh(n)
        assert m.n_cells == n * n


def test_cells_counterclockwise():
    m = generate_unit_square_mesh(5)
    p = m.nodes[m.cells]
    x, y = p[..., 0], p[..., 1]
    xn, yn = np.roll(x, -1, axis=1), np.roll(y, -1, axis=1)
    areas = 0.5 * np.sum(x * yn - xn * y, axis=1)
    assert np.all(areas > 0)


def test_boundary_tags_by_coordinate():
    m = generate_unit_square_mesh(6)
    for tag, coord, value in (("left", 0, 0.0), ("right", 0, 1.0),
                              ("bottom", 1, 0.0), ("top", 1, 1.0)):
        nodes = m.boundary_nodes(tag)
        assert nodes.size == 7
        assert np.allclose(m.nodes[nodes, coord], value)


def test_outward_normals():
    # tangent (t_x, t_y) of an oriented facet gives outward normal (t_y, -t_x)
    m = generate_unit_square_mesh(4)
    expected = {"bottom": (0.0, -1.0), "right": (1.0, 0.0),
                "top": (0.0, 1.0), "left": (-1.0, 0.0)}
    for i, j, tag in m.boundary_facets:
        t = m.nodes[j] - m.nodes[i]
        t /= np.linalg.norm(t)
        nu = (t[1], -t[0])
        assert np.allclose(nu, expected[tag])


def test_facets_accessor_shapes():
    m = generate_unit_square_mesh(3)
    assert m.facets("left").shape == (3, 2)
    assert m.facets("slit_lower").shape == (0, 2)
    assert m.boundary_nodes("slit_upper").size == 0


def test_nodes_frozen():
    m = generate_unit_square_mesh(2)
    with pytest.raises(ValueError):
        m.nodes[0, 0] = 5.0


# ---------------------------------------------------------------------------
# slit insertion
# ---------------------------------------------------------------------------

def test_edge_slit_duplicates_mouth_and_interior():
    # segment (0,.5)-(.5,.5) on an 8x8 grid covers nodes at x=0,1/8,...,1/2;
    # the tip at (.5,.5) stays shared, the other four get upper copies
    m = notched_unit_square(8)
    assert m.n_nodes == 81 + 4
    lower = m.boundary_nodes("slit_lower")
    upper = m.boundary_nodes("slit_upper")
    shared = np.intersect1d(lower, upper)
    assert shared.size == 1
    assert np.allclose(m.nodes[shared[0]], [0.5, 0.5])


def test_slit_twins_share_coordinates():
    m0 = generate_unit_square_mesh(8)
    m = notched_unit_square(8)
    for nid in range(m0.n_nodes, m.n_nodes):
        dist = np.linalg.norm(m.nodes[:m0.n_nodes] - m.nodes[nid], axis=1)
        assert dist.min() <= GEOM_TOL


def test_slit_separates_faces():
    # cells below the slit keep original node ids, cells above use copies
    m = notched_unit_square(8)
    y_slit = 0.5
    lower_ids = set(m.boundary_nodes("slit_lower").tolist())
    upper_ids = set(m.boundary_nodes("slit_upper").tolist())
    centroids = m.nodes[m.cells].mean(axis=1)
    for c in range(m.n_cells):
        cell = set(m.cells[c].tolist())
        if centroids[c, 1] > y_slit:
            assert not (cell & (lower_ids - upper_ids))
        else:
            assert not (cell & (upper_ids - lower_ids))


def test_left_boundary_follows_rewired_cells():
    # the left-edge facet just above the slit must reference the upper copy
    m = notched_unit_square(8)
    upper_only = set(m.boundary_nodes("slit_upper").tolist()) \
        - set(m.boundary_nodes("slit_lower").tolist())
    mouth_twins = [n for n in upper_only if abs(m.nodes[n][0]) <= GEOM_TOL]
    assert len(mouth_twins) == 1
    left = set(m.boundary_nodes("left").tolist())
    assert mouth_twins[0] in left


def test_interior_slit_keeps_both_tips():
    base = generate_unit_square_mesh(8)
    m = insert_slit(base, SlitSpec((0.25, 0.5), (0.75, 0.5)))
    assert m.n_nodes == base.n_nodes + 3
    shared = np.intersect1d(m.boundary_nodes("slit_lower"),
                            m.boundary_nodes("slit_upper"))
    assert shared.size == 2


def test_through_slit_splits_everywhere():
    base = generate_unit_square_mesh(8)
    m = insert_slit(base, SlitSpec((0.0, 0.5), (1.0, 0.5)))
    assert m.n_nodes == base.n_nodes + 9
    shared = np.intersect1d(m.boundary_nodes("slit_lower"),
                            m.boundary_nodes("slit_upper"))
    assert shared.size == 0


def test_zero_length_slit_is_identity():
    base = generate_unit_square_mesh(4)
    m = insert_slit(base, SlitSpec((0.5, 0.5), (0.5, 0.5)))
    assert m is base


def test_slit_endpoint_must_be_node():
    base = generate_unit_square_mesh(4)
    with pytest.raises(MeshError):
        insert_slit(base, SlitSpec((0.0, 0.5), (0.37, 0.5)))


def test_slit_must_be_horizontal():
    with pytest.raises(MeshError):
        SlitSpec((0.0, 0.25), (0.5, 0.5))


def test_slit_must_run_left_to_right():
    with pytest.raises(MeshError):
        SlitSpec((0.5, 0.5), (0.0, 0.5))


def test_notched_square_requires_even_cells():
    with pytest.raises(MeshError):
        notched_unit_square(9)


def test_slit_facet_orientation():
    # lower face normal points up into the crack, upper face normal down
    m = notched_unit_square(8)
    for i, j, tag in m.boundary_facets:
        t = m.nodes[j] - m.nodes[i]
        nu = np.array([t[1], -t[0]])
        nu /= np.linalg.norm(nu)
        if tag == "slit_lower":
            assert np.allclose(nu, [0.0, 1.0])
        elif tag == "slit_upper":
            assert np.allclose(nu, [0.0, -1.0])


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def test_validate_rejects_clockwise_cell():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(MeshError, match="counterclockwise"):
        Mesh(nodes, np.array([[0, 3, 2, 1]]))


def test_validate_rejects_out_of_range_index():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(MeshError, match="out of range"):
        Mesh(nodes, np.array([[0, 1, 2, 7]]))


def test_validate_rejects_repeated_node():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(MeshError, match="repeated"):
        Mesh(nodes, np.array([[0, 1, 2, 2]]))


def test_validate_rejects_unknown_tag():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(MeshError, match="unknown facet tag"):
        Mesh(nodes, np.array([[0, 1, 2, 3]]), [(0, 1, "lid")])


def test_validate_rejects_non_edge_facet():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(MeshError, match="not an edge"):
        Mesh(nodes, np.array([[0, 1, 2, 3]]), [(0, 2, "left")])


def test_validate_rejects_nonfinite_coordinates():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [np.nan, 1.0], [0.0, 1.0]])
    with pytest.raises(MeshError, match="non-finite"):
        Mesh(nodes, np.array([[0, 1, 2, 3]]))


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

def test_round_trip_bit_exact(tmp_path):
    m = notched_unit_square(8)
    p1 = tmp_path / "a.txt"
    p2 = tmp_path / "b.txt"
    write_mesh(m, p1)
    m2 = load_mesh(p1)
    write_mesh(m2, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert np.array_equal(m.nodes, m2.nodes)
    assert np.array_equal(m.cells, m2.cells)
    assert m.boundary_facets == m2.boundary_facets


def test_round_trip_awkward_floats(tmp_path):
    nodes = np.array([[0.1 + 1e-17, 0.0], [1.0 / 3.0, 0.0],
                      [1.0 / 3.0, 0.7], [0.1, 0.7]])
    m = Mesh(nodes, np.array([[0, 1, 2, 3]]), [(0, 1, "bottom")])
    p = tmp_path / "m.txt"
    write_mesh(m, p)
    m2 = load_mesh(p)
    assert np.array_equal(m.nodes, m2.nodes)


def test_loader_accepts_comments_and_blanks(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("# header comment\nquadmesh 1\n\nnodes 4\n0 0\n1 0 # inline\n"
                 "1 1\n0 1\ncells 1\n0 1 2 3\nbfacets 1\n0 1 bottom\n")
    m = load_mesh(p)
    assert m.n_nodes == 4 and m.n_cells == 1


@pytest.mark.parametrize("body, fragment", [
    ("quadmesh 2\n", "header"),
    ("quadmesh 1\nnodes x\n", "bad count"),
    ("quadmesh 1\nnodes 1\n0 0 0\n", "2 coordinates"),
    ("quadmesh 1\nnodes 1\n0 zzz\n", "bad coordinate"),
    ("quadmesh 1\nnodes 1\n0 0\ncells 1\n0 1 2\n", "4 node indices"),
    ("quadmesh 1\nnodes 1\n0 0\ncells 1\n0 1 2 x\n", "bad node index"),
    ("quadmesh 1\nnodes 4\n0 0\n1 0\n1 1\n0 1\ncells 1\n0 1 2 3\n"
     "bfacets 1\n0 1 roof\n", "unknown facet tag"),
    ("quadmesh 1\nnodes 4\n0 0\n1 0\n1 1\n0 1\ncells 1\n0 1 2 3\n"
     "bfacets 0\nextra\n", "trailing"),
    ("quadmesh 1\nnodes 2\n0 0\n", "unexpected end"),
])
def test_loader_errors(tmp_path, body, fragment):
    p = tmp_path / "bad.txt"
    p.write_text(body)
    with pytest.raises(MeshError, match=fragment):
        load_mesh(p)


def test_loader_error_carries_line_number(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("quadmesh 1\nnodes 1\n0 oops\n")
    with pytest.raises(MeshError, match=r"bad\.txt:3"):
        load_mesh(p)


def test_loaded_mesh_is_validated(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("quadmesh 1\nnodes 4\n0 0\n1 0\n1 1\n0 1\n"
                 "cells 1\n0 3 2 1\nbfacets 0\n")
    with pytest.raises(MeshError, match="counterclockwise"):
        load_mesh(p)
