import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize_scalar

from bolt.errors import PatternError
from bolt.mesh import PatternLayout2D
from bolt.pattern.admm import admm_optimize
from bolt.pattern.energy import (base_energy, base_quadratic, edge_energy, edge_neighborhoods,
                                 edge_scale_and_energy)
from bolt.pattern.estimator import PatternConfig, PatternOptimizer, seam_length_deltas
from bolt.pattern.frames import bind_tangents, build_target_frames, polar_3x2, polar_frames
from bolt.pattern.tidy import cotan_laplacian, dirichlet_energy, dirichlet_tidy
from bolt.primitives import flat_sheet, grid_panel, tube_garment, two_panel_sewn

from conftest import central_fd, edge_energy_gradient, rel_err

UNIT = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def test_flat_triangle_frames_are_axes():
    layout = PatternLayout2D(UNIT, [[0, 1, 2]], [0, 0, 0])
    F = bind_tangents(layout).frames(np.c_[UNIT, np.zeros(3)])[0]
    assert np.allclose(F[:, 0], [1, 0, 0]) and np.allclose(F[:, 1], [0, 1, 0])


def test_rotated_triangle_carries_warp():
    layout = PatternLayout2D(UNIT, [[0, 1, 2]], [0, 0, 0])
    X = np.c_[UNIT, np.zeros(3)] @ rot_z(np.pi / 2).T
    F = bind_tangents(layout).frames(X)[0]
    assert np.allclose(F[:, 0], [0, 1, 0], atol=1e-15)


def test_bind_round_trip_recovers_axes(rng):
    for _ in range(20):
        P = rng.normal(size=(3, 2))
        if np.linalg.det(np.stack([P[1] - P[0], P[2] - P[0]])) < 0:
            P = P[[0, 2, 1]]
        layout = PatternLayout2D(P, [[0, 1, 2]], [0, 0, 0])
        b = bind_tangents(layout)
        E2 = np.stack([P[1] - P[0], P[2] - P[0]], axis=1)
        assert np.allclose(E2 @ b.M[0], np.eye(2), atol=1e-9)


def test_polar_of_orthonormal_and_scaled_frames(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(3, 2)))
    R, S = polar_3x2(Q)
    assert np.allclose(R, Q) and np.allclose(S, np.eye(2))
    R, S = polar_3x2(Q @ np.diag([2.0, 1.0]))
    assert np.allclose(S, np.diag([2.0, 1.0]))


@given(st.integers(0, 10000))
def test_polar_identities(seed):
    F = np.random.default_rng(seed).normal(size=(5, 3, 2))
    R, S = polar_frames(F)
    assert np.allclose(R @ S, F, atol=1e-10)
    assert np.allclose(np.einsum("tki,tkj->tij", R, R), np.eye(2), atol=1e-10)
    assert np.all(np.linalg.eigvalsh(S) >= -1e-12)


def test_rank_deficient_frame_raises():
    with pytest.raises(PatternError, match="crumpled"):
        polar_3x2(np.array([[1.0, 2.0], [0.0, 0.0], [0.0, 0.0]]))


def test_unstretched_source_modes_coincide(rng):
    g = tube_garment(5.0, 4.0, 12, 3)
    b = bind_tangents(g.layout2d, g.mesh3d)
    tgt = g.mesh3d.positions * [1.2, 0.9, 1.1] + rng.normal(0, 0.01, g.mesh3d.positions.shape)
    Fl, _ = build_target_frames(b, g.mesh3d.positions, tgt, "loose")
    Fp, _ = build_target_frames(b, g.mesh3d.positions, tgt, "preserve_fit")
    assert np.abs(Fl - Fp).max() < 1e-9


def test_prestretched_source_keeps_its_stretch():
    g = flat_sheet(6.0, 6.0, 3, 3)
    b = bind_tangents(g.layout2d, g.mesh3d)
    src = g.mesh3d.positions * [1.2, 1.0, 1.2]  # 1.2x in-plane (xz plane)
    tgt = src @ rot_z(0.3).T
    F, _ = build_target_frames(b, src, tgt, "preserve_fit")
    assert np.allclose(np.linalg.svd(F, compute_uv=False), 1.2)


def test_identity_target_preserves_source_frames(rng):
    g = tube_garment(5.0, 4.0, 12, 3)
    src = g.mesh3d.positions + rng.normal(0, 0.05, g.mesh3d.positions.shape)
    b = bind_tangents(g.layout2d)
    F, B = build_target_frames(b, src, src, "preserve_fit")
    assert np.abs(F - b.frames(src)).max() < 1e-9


def test_base_energy_zero_at_rest():
    g = flat_sheet(6.0, 4.0, 3, 2)
    B = bind_tangents(g.layout2d).M
    E, grad, _ = base_energy(g.layout2d.positions2d, g.layout2d, B)
    assert abs(E) < 1e-12 and np.abs(grad).max() < 1e-12


def test_base_energy_single_triangle_scaled():
    layout = PatternLayout2D(UNIT, [[0, 1, 2]], [0, 0, 0])
    B = bind_tangents(layout).M
    eps = 1e-3
    x = 2.0 * UNIT
    E, _, _ = base_energy(x, layout, B, epsilon=eps)
    # F = 2I against the identity target: 1/2 A |F - I|^2 = 1/2 * 0.5 * 2, plus the anchor term
    assert E == pytest.approx(0.5 + 0.5 * eps * np.sum((x - UNIT) ** 2), rel=1e-12)


def test_base_energy_gradient_matches_fd(rng):
    P, T = grid_panel(5.0, 4.0, 5, 2)
    layout = PatternLayout2D(P, T, np.zeros(len(P), int))
    assert len(T) == 20
    B = bind_tangents(layout).M @ (np.eye(2) + rng.normal(0, 0.2, (len(T), 2, 2)))
    x = P + rng.normal(0, 0.3, P.shape)
    _, g, _ = base_energy(x, layout, B, epsilon=0.01)
    fd = central_fd(lambda y: base_energy(y, layout, B, epsilon=0.01)[0], x, 1e-5)
    assert rel_err(g, fd) < 1e-5


def test_edge_energy_scale_cases():
    rest = np.array([1.0, 0.0, 0.0, 1.0])
    S, W, _ = edge_scale_and_energy(rest, rest, 1.0)
    assert S == pytest.approx(1.0) and W == pytest.approx(0.0)
    S, W, _ = edge_scale_and_energy(2 * rest, rest, 1.0)
    assert S == pytest.approx(2.0) and W == pytest.approx(0.0, abs=1e-14)


def test_edge_energy_rotated_matches_scan():
    rest = np.array([1.0, 0.2, -0.3, 0.8])
    c, s = np.cos(np.pi / 6), np.sin(np.pi / 6)
    R = np.array([[c, -s], [s, c]])
    z = np.r_[R @ rest[:2], R @ rest[2:]]
    L = 1.7
    S, W, _ = edge_scale_and_energy(z, rest, L)
    res = minimize_scalar(lambda t: 0.5 * L * np.sum((z - t * rest) ** 2), bracket=(0, 2),
                          method="golden", tol=1e-12)
    assert S == pytest.approx(res.x, abs=1e-7)
    assert W == pytest.approx(res.fun, abs=1e-10)


def test_edge_energy_gradient_matches_fd(rng):
    g = two_panel_sewn(n=4)
    hood = edge_neighborhoods(g.layout2d, g.seams)
    x = g.layout2d.positions2d + rng.normal(0, 0.3, g.layout2d.positions2d.shape)
    grad = edge_energy_gradient(hood, x)
    fd = central_fd(lambda y: edge_energy(y, hood), x, 1e-6)
    assert rel_err(grad, fd) < 1e-6


def test_admm_without_constraints_is_quadratic_minimum(rng):
    g = flat_sheet(4.0, 4.0, 2, 2)
    B = bind_tangents(g.layout2d).M * 1.1
    q = base_quadratic(g.layout2d, B)
    from bolt.pattern.energy import EdgeNeighborhoods
    empty = EdgeNeighborhoods(np.zeros(0, int), np.zeros((0, 2), int), np.zeros((0, 4)),
                              np.zeros(0), np.zeros(0, int))
    st_ = admm_optimize(q, empty, g.layout2d.positions2d)
    assert st_.iterations == 1
    assert np.allclose(st_.x, q.minimizer())


def test_recovery_of_rest_layout_from_perturbed_start(rng):
    g = tube_garment(8.0, 10.0, 16, 5)
    po = PatternOptimizer().fit(g)
    x0 = g.layout2d.positions2d + rng.normal(0, 0.5, g.layout2d.positions2d.shape)
    x = po.transform(g.mesh3d.positions, x0=x0)
    assert np.abs(x - g.layout2d.positions2d).max() < 1e-4
    assert po.report_.converged and po.report_.iterations <= 500


def _scaled_two_panel(edge_weight=1000.0):
    g = two_panel_sewn()
    po = PatternOptimizer(edge_weight=edge_weight).fit(g)
    B = np.array(po.binding_.M)
    pid = g.layout2d.panel_id[g.layout2d.triangles[:, 0]]
    B[pid == 1] = B[pid == 1] @ np.diag([1.0, 1.5])
    return g, po, po.optimize(B)


def test_seam_lengths_agree_after_anisotropic_scaling():
    g, po, x = _scaled_two_panel()
    assert max(seam_length_deltas(g, x)) < 5e-3
    # without the edge energy the panels disagree by far more
    g2, _, x2 = _scaled_two_panel(edge_weight=1e-6)
    assert max(seam_length_deltas(g2, x2)) > 0.1


def test_flipped_layout_raises():
    g = flat_sheet(4.0, 4.0, 2, 2)
    po = PatternOptimizer(tidy=False).fit(g)
    B = np.array(po.binding_.M)
    B[:, :, 0] *= -1.0  # mirror every target frame
    with pytest.raises(PatternError, match="flipped"):
        po.optimize(B)


def test_config_validation():
    with pytest.raises(Exception):
        PatternConfig(mode="tight")
    assert PatternConfig.from_dict(PatternConfig().to_dict()) == PatternConfig()


def test_tidy_cases(rng):
    P, T = grid_panel(4.0, 4.0, 4, 4)
    from bolt.mesh import boundary_edges
    pins = np.unique(boundary_edges(T))
    assert np.allclose(dirichlet_tidy(P, pins, P, T), P, atol=1e-12)
    x = P.copy()
    x[pins] *= 1.3
    assert np.allclose(dirichlet_tidy(x, pins, P, T), 1.3 * P, atol=1e-12)
    noisy = P + rng.normal(0, 0.2, P.shape) * ~np.isin(np.arange(len(P)), pins)[:, None]
    Lc = cotan_laplacian(P, T)
    assert dirichlet_energy(dirichlet_tidy(noisy, pins, P, T), Lc) < dirichlet_energy(noisy, Lc)
