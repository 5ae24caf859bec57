import numpy as np
import pytest
from hypothesis import given, strategies as st

from bolt.bvh import (TriangleBVH, closest_point_on_mesh, closest_points, proximity_pairs, raycast,
                      winding_number)
from bolt.mesh import TriMesh3
from bolt.primitives import flat_sheet, icosphere, uv_sphere


def _segment_closest(q, a, b):
    t = np.clip(np.dot(q - a, b - a) / np.dot(b - a, b - a), 0.0, 1.0)
    return a + t * (b - a)


def _triangle_closest(q, a, b, c):
    """Plane projection when it lands inside, otherwise the best of the three edges."""
    E = np.stack([b - a, c - a], axis=1)
    vw = np.linalg.lstsq(E, q - a, rcond=None)[0]
    if vw.min() >= 0 and vw.sum() <= 1:
        return a + E @ vw
    cands = [_segment_closest(q, a, b), _segment_closest(q, b, c), _segment_closest(q, c, a)]
    return min(cands, key=lambda p: np.linalg.norm(p - q))


def _segment_segment(p1, q1, p2, q2):
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    A = np.array([[d1 @ d1, -d1 @ d2], [-d1 @ d2, d2 @ d2]])
    if abs(np.linalg.det(A)) > 1e-14:
        s, t = np.linalg.solve(A, [-d1 @ r, d2 @ r])
        if 0 <= s <= 1 and 0 <= t <= 1:
            return np.linalg.norm(p1 + s * d1 - p2 - t * d2)
    return min(np.linalg.norm(p1 - _segment_closest(p1, p2, q2)),
               np.linalg.norm(q1 - _segment_closest(q1, p2, q2)),
               np.linalg.norm(p2 - _segment_closest(p2, p1, q1)),
               np.linalg.norm(q2 - _segment_closest(q2, p1, q1)))


def _edge_crosses(a, b, T):
    M = np.stack([b - a, T[0] - T[1], T[0] - T[2]], axis=1)
    if abs(np.linalg.det(M)) < 1e-14:
        return False
    s, u, v = np.linalg.solve(M, T[0] - a)
    return 0 <= s <= 1 and u >= 0 and v >= 0 and u + v <= 1


def tri_tri_distance(P, Q):
    d = min(np.linalg.norm(p - _triangle_closest(p, *Q)) for p in P)
    d = min(d, min(np.linalg.norm(q - _triangle_closest(q, *P)) for q in Q))
    for i in range(3):
        for j in range(3):
            d = min(d, _segment_segment(P[i], P[(i + 1) % 3], Q[j], Q[(j + 1) % 3]))
    for A, B in ((P, Q), (Q, P)):
        if any(_edge_crosses(A[i], A[(i + 1) % 3], B) for i in range(3)):
            return 0.0
    return d


def brute_closest(q, mesh):
    best = (np.inf, None)
    for a, b, c in mesh.positions[mesh.triangles]:
        p = _triangle_closest(q, a, b, c)
        d = np.linalg.norm(p - q)
        if d < best[0]:
            best = (d, p)
    return best


def monte_carlo_winding(q, mesh, n=200000, seed=0):
    """Fraction of random rays from q with odd (signed) crossing count."""
    rng = np.random.default_rng(seed)
    D = rng.normal(size=(n, 3))
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    t, tri, _ = raycast(np.tile(q, (n, 1)), D, mesh)
    # signed count of the first crossing is enough for a simple surface seen from outside
    hit = tri >= 0
    s = np.zeros(n)
    N = mesh.face_normals()
    s[hit] = np.sign(np.einsum("ij,ij->i", N[tri[hit]], D[hit]))
    return float(s.mean())


def test_query_at_vertex_returns_vertex():
    m = icosphere(1.0, 2)
    p, _, _, d = closest_points(m.positions[5], m)
    assert np.allclose(p[0], m.positions[5]) and d[0] == pytest.approx(0.0, abs=1e-12)


def test_unit_sphere_closest_point_outside_and_center_inside():
    m = icosphere(1.0, 3)
    p, _, _, side = closest_point_on_mesh([2.0, 0, 0], m)
    d, ref = brute_closest(np.array([2.0, 0, 0]), m)
    assert np.allclose(p, ref, atol=1e-12)
    assert np.allclose(p, [1, 0, 0], atol=1e-2)
    assert side == "outside"
    assert closest_point_on_mesh([0, 0, 0], m)[3] == "inside"


def test_closest_points_match_brute_force(rng):
    m = icosphere(3.0, 2)
    Q = rng.uniform(-5, 5, size=(60, 3))
    p, tri, bary, d = closest_points(Q, m)
    for q, pi, ti, bi, di in zip(Q, p, tri, bary, d):
        dref, _ = brute_closest(q, m)
        assert di == pytest.approx(dref, abs=1e-10)
        assert np.allclose(bi @ m.positions[m.triangles[ti]], pi, atol=1e-10)


def test_winding_number_closed_sphere():
    m = icosphere(1.0, 3)
    assert winding_number([0, 0, 0], m, beta=None) == pytest.approx(1.0, abs=1e-9)
    assert winding_number([2.0, 0, 0], m, beta=None) == pytest.approx(0.0, abs=1e-9)
    # the far-field approximation stays well clear of the 0.25 / 0.5 thresholds
    assert winding_number([0, 0, 0], m) == pytest.approx(1.0, abs=1e-2)


def test_fast_winding_agrees_with_exact(rng):
    m = icosphere(2.0, 3)
    Q = rng.uniform(-4, 4, size=(200, 3))
    fast = winding_number(Q, m)
    exact = winding_number(Q, m, beta=None)
    assert np.abs(fast - exact).max() < 1e-2


def test_open_hemisphere_rim_center_near_half():
    m = uv_sphere(1.0, 12, 32, hemisphere=True)
    q = np.array([0.0, 0.0, 1e-3])
    w = winding_number(q, m, beta=None)
    assert w == pytest.approx(monte_carlo_winding(q, m), abs=1e-2)
    assert abs(w) == pytest.approx(0.5, abs=2e-2)


def test_parallel_triangles_pair_at_distance():
    A = TriMesh3([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 0.1], [1, 0, 0.1], [0, 1, 0.1]],
                 [[0, 1, 2], [3, 4, 5]])
    bvh = TriangleBVH.build(A)
    pairs = proximity_pairs(bvh, A, bvh, A, 0.2)
    assert len(pairs) == 1
    assert pairs.distance[0] == pytest.approx(0.1, abs=1e-12)
    assert len(proximity_pairs(bvh, A, bvh, A, 0.05)) == 0


def test_self_proximity_matches_all_pairs(rng):
    g = flat_sheet(10.0, 10.0, 10, 10)
    X = g.mesh3d.positions.copy()
    X[:, 1] += 0.4 * np.cos(X[:, 0]) * np.cos(X[:, 2])
    # fold the sheet over itself so distant triangles come close
    fold = X[:, 0] > 0
    X[fold, 0] = -X[fold, 0]
    X[fold, 1] += 0.25
    m = TriMesh3(X + rng.normal(scale=1e-3, size=X.shape), g.mesh3d.triangles)
    assert m.n_triangles == 200
    bvh = TriangleBVH.build(m)
    got = proximity_pairs(bvh, m, bvh, m, 0.3).as_set()
    ref = set()
    P = m.positions[m.triangles]
    for i in range(m.n_triangles):
        for j in range(i + 1, m.n_triangles):
            gap = np.maximum(P[j].min(0) - P[i].max(0), P[i].min(0) - P[j].max(0))
            if np.linalg.norm(np.maximum(gap, 0.0)) > 0.3:
                continue
            if tri_tri_distance(P[i], P[j]) <= 0.3:
                ref.add((i, j))
    assert got == ref
    assert len(ref) > 200


def test_skip_adjacent_drops_vertex_sharing_pairs():
    g = flat_sheet(4.0, 4.0, 4, 4)
    m = g.mesh3d
    bvh = TriangleBVH.build(m)
    pairs = proximity_pairs(bvh, m, bvh, m, 0.5, skip_adjacent=True)
    T = m.triangles
    for a, b in pairs.as_set():
        assert not set(T[a]) & set(T[b])


def test_raycast_hits_sphere_front_face():
    m = icosphere(1.0, 3)
    t, tri, _ = raycast([[3.0, 0, 0]], [[-1.0, 0, 0]], m)
    assert tri[0] >= 0 and t[0] == pytest.approx(2.0, abs=1e-2)
    # from inside, front_only ignores the outward-facing shell
    t, tri, _ = raycast([[0.0, 0, 0]], [[1.0, 0, 0]], m, front_only=True)
    assert tri[0] == -1 and np.isinf(t[0])


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_refit_equals_rebuild_for_translation(dx, dy, dz):
    m = icosphere(1.0, 2)
    moved = m.translated([dx, dy, dz])
    bvh = TriangleBVH.build(m).updated(moved)
    q = np.array([[0.3, 2.0, -0.5], [dx, dy, dz]])
    a = closest_points(q, moved, bvh)[3]
    b = closest_points(q, moved)[3]
    assert np.allclose(a, b, atol=1e-12)
