import numpy as np
import pytest
from hypothesis import given, strategies as st

from bolt.errors import ValidationError
from bolt.mesh import PatternLayout2D, TriMesh3, boundary_edges, unique_edges, vertex_adjacency
from bolt.primitives import grid_panel, icosphere, tube_garment
from bolt.seams import build_seam_groups


def test_trimesh_arrays_are_read_only():
    m = icosphere(1.0, 1)
    with pytest.raises(ValueError):
        m.positions[0, 0] = 5.0


def test_degenerate_triangle_rejected():
    with pytest.raises(ValidationError, match="degenerate"):
        TriMesh3([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])


def test_out_of_range_index_rejected():
    with pytest.raises(ValidationError, match="out of range"):
        TriMesh3([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 3]])


def test_layout_rejects_flipped_and_mixed_panel_triangles():
    P = [[0, 0], [1, 0], [0, 1]]
    with pytest.raises(ValidationError, match="signed area"):
        PatternLayout2D(P, [[0, 2, 1]], [0, 0, 0])
    with pytest.raises(ValidationError, match="spans"):
        PatternLayout2D(P, [[0, 1, 2]], [0, 0, 1])


def test_icosphere_is_closed_with_unit_normals():
    m = icosphere(2.0, 2)
    _, counts = unique_edges(m.triangles)
    assert np.all(counts == 2)
    assert len(boundary_edges(m.triangles)) == 0
    n = m.vertex_normals()
    assert np.allclose(np.linalg.norm(n, axis=1), 1.0)
    # outward normals on a sphere are radial
    assert np.allclose(n, m.positions / 2.0, atol=0.05)


def test_tube_garment_is_isometric_to_its_layout():
    g = tube_garment(5.0, 4.0, 16, 3)
    from bolt.mesh import unique_edges as ue
    e, _ = ue(g.mesh3d.triangles)
    l3 = np.linalg.norm(np.diff(g.mesh3d.positions[e], axis=1)[:, 0], axis=1)
    l2 = np.linalg.norm(np.diff(g.layout2d.positions2d[e], axis=1)[:, 0], axis=1)
    assert np.allclose(l3, l2, atol=1e-12)


def test_vertex_adjacency_is_symmetric():
    P, T = grid_panel(2.0, 2.0, 2, 2)
    indptr, idx = vertex_adjacency(len(P), T)
    pairs = {(i, int(j)) for i in range(len(P)) for j in idx[indptr[i]:indptr[i + 1]]}
    assert all((j, i) in pairs for i, j in pairs)


def test_seam_groups_transitive_closure():
    s = build_seam_groups([(0, 1), (1, 2)], np.zeros((4, 3)))
    assert s.n_groups == 1
    assert s.groups[0].tolist() == [0, 1, 2]


def test_seam_groups_empty():
    s = build_seam_groups([], np.zeros((4, 3)))
    assert s.n_groups == 0
    assert s.group_of(4).tolist() == [-1, -1, -1, -1]


def test_seam_offsets_from_centroid():
    X = np.array([[0, 0, 0], [0, 0, 0], [0, 0, 3.0]])
    s = build_seam_groups([(0, 1), (1, 2)], X)
    # centroid is (0, 0, 1)
    assert np.allclose(s.offsets[0], [[0, 0, -1], [0, 0, -1], [0, 0, 2]])


def test_seam_pair_out_of_range_rejected():
    with pytest.raises(ValidationError):
        build_seam_groups([(0, 7)], np.zeros((3, 3)))


@given(st.lists(st.tuples(st.integers(0, 11), st.integers(0, 11)), min_size=1, max_size=20),
       st.randoms(use_true_random=False))
def test_seam_groups_independent_of_pair_order(pairs, r):
    X = np.arange(36, dtype=float).reshape(12, 3)
    shuffled = list(pairs)
    r.shuffle(shuffled)
    a = build_seam_groups(pairs, X)
    b = build_seam_groups(shuffled, X)
    assert [g.tolist() for g in a.groups] == [g.tolist() for g in b.groups]
    for g, off in zip(a.groups, a.offsets):
        assert np.allclose(off.sum(axis=0), 0.0)
