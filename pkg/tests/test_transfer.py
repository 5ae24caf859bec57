import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from bolt.bvh import closest_points
from bolt.errors import ConfigurationError
from bolt.primitives import icosphere, tube_garment
from bolt.transfer.estimator import GarmentTransfer, transfer_garment
from bolt.transfer.fem import (BlockSystem, assemble_system, build_boundary_quadrature,
                               cell_deformation, divergence_element, viscosity_element, volume_bias)
from bolt.transfer.grid import CORNERS, activate_band, sample_displacement
from bolt.transfer.solver import conjugate_gradient, fixed_point_solve, solve_schur

from conftest import random_block_system


def point_triangle_distances(P, V, T):
    """Exact point-to-mesh distance, vectorized over points (plane or edge projection)."""
    best = np.full(len(P), np.inf)
    for a, b, c in V[T]:
        E = np.stack([b - a, c - a], axis=1)
        vw = np.linalg.lstsq(E, (P - a).T, rcond=None)[0].T
        inside = (vw >= 0).all(axis=1) & (vw.sum(axis=1) <= 1)
        d = np.where(inside, np.linalg.norm(P - a - vw @ E.T, axis=1), np.inf)
        for p, q in ((a, b), (b, c), (c, a)):
            t = np.clip((P - p) @ (q - p) / ((q - p) @ (q - p)), 0, 1)
            d = np.minimum(d, np.linalg.norm(P - p - t[:, None] * (q - p), axis=1))
        best = np.minimum(best, d)
    return best


@pytest.fixture(scope="module")
def sphere():
    return icosphere(1.0, 1)


def test_band_is_a_shell_within_band_width(sphere):
    g = activate_band(sphere, 0.5, 1.0)
    assert g.cell_distance.max() <= 1.0
    d = point_triangle_distances(g.cell_centers(), sphere.positions, sphere.triangles)
    assert np.allclose(d, g.cell_distance, atol=1e-12)


def test_band_narrower_than_cells_rejected(sphere):
    with pytest.raises(ConfigurationError):
        activate_band(sphere, 0.5, 0.4)


def test_band_matches_dense_scan(sphere):
    h, band = 4.0 / 32, 0.5
    g = activate_band(sphere, h, band)
    I = np.stack(np.meshgrid(*(np.arange(s) for s in g.shape), indexing="ij"), -1).reshape(-1, 3)
    centers = g.origin + h * (I + 0.5)
    d = point_triangle_distances(centers, sphere.positions, sphere.triangles)
    ref = {tuple(c) for c in I[d <= band]}
    assert {tuple(c) for c in g.cells} == ref
    # every corner of an active cell is a node
    nodes = {tuple(n) for n in g.nodes}
    assert all(tuple(c + k) in nodes for c in g.cells[:50] for k in CORNERS)


def _quad(body, target):
    g = activate_band(body, 0.5, 1.5)
    return g, build_boundary_quadrature(g, body, target)


def test_identity_quadrature_targets_are_zero(sphere):
    _, q = _quad(sphere, sphere.positions)
    assert len(q) > 0 and np.all(q.targets == 0.0)


def test_translation_quadrature_targets_equal_shift(sphere):
    _, q = _quad(sphere, sphere.positions + [1.0, 0, 0])
    assert np.allclose(q.targets, [1.0, 0, 0], atol=1e-14)


def test_scaled_sphere_targets_follow_radial_map():
    body = icosphere(1.0, 3)
    _, q = _quad(body, 1.5 * body.positions)
    # every sample is tied to the displacement at its surface projection, and
    # the radial map is linear on each triangle, so interpolation is exact
    proj = closest_points(q.points, body)[0]
    assert np.allclose(q.targets, 0.5 * proj, atol=1e-12)


def test_viscosity_element_energy_of_linear_field(rng):
    h, nu = 0.7, 2.5
    K = viscosity_element(h, nu)
    assert np.abs(K - K.T).max() == 0.0
    G = rng.normal(size=(3, 3))
    corners = h * CORNERS
    u = (corners @ G.T).ravel()
    sym = 0.5 * (G + G.T)
    assert 0.5 * u @ K @ u == pytest.approx(0.5 * nu * h ** 3 * np.sum(sym * sym), rel=1e-12)
    # divergence row integrates tr(G) over the cell
    assert divergence_element(h) @ u == pytest.approx(h ** 3 * np.trace(G), rel=1e-12)


def test_system_gradient_matches_energy_fd(rng):
    body = icosphere(1.0, 0)
    # the smallest band the grid allows (two cells wide) around a 20-face sphere
    g = activate_band(body, 1.5, 3.0)
    q = build_boundary_quadrature(g, body, 1.1 * body.positions)
    sysm = assemble_system(g, q, 1.0, 0.01, 50.0)
    assert sysm.n_dofs <= 400
    assert abs(sysm.A - sysm.A.T).max() == 0.0
    u = rng.normal(size=sysm.n_dofs)
    k = rng.normal(size=g.n_cells)
    S = sysm.schur_matrix()
    grad = S @ u - sysm.schur_rhs(k)
    h = 1e-5
    idx = rng.choice(sysm.n_dofs, 40, replace=False)
    for i in idx:
        e = np.zeros_like(u)
        e[i] = h
        fd = (sysm.energy(u + e, k) - sysm.energy(u - e, k)) / (2 * h)
        assert fd == pytest.approx(grad[i], rel=1e-6, abs=1e-6 * np.abs(grad).max())


def test_zero_boundary_data_gives_zero_solution(sphere):
    g, q = _quad(sphere, sphere.positions)
    sysm = assemble_system(g, q, 1.0, 0.01, 500.0)
    assert np.all(sysm.f == 0)
    u, p, it, _ = solve_schur(sysm, np.zeros(g.n_cells))
    assert it == 0 and np.all(u == 0) and np.all(p == 0)


def test_one_dof_schur_matches_hand_inversion():
    a, b, c, f, k = 3.0, 1.5, 0.2, 2.0, -0.7
    s = BlockSystem(sp.csr_matrix([[a]]), sp.csr_matrix([[b]]), np.array([c]), np.array([f]))
    u, p, _, _ = solve_schur(s, np.array([k]), tol=1e-14)
    det = a * c + b * b
    assert u[0] == pytest.approx((f * c + b * k) / det, rel=1e-12)
    assert p[0] == pytest.approx((a * k - b * f) / det, rel=1e-12)


def test_cg_solves_spd_system(rng):
    s, A, _ = random_block_system(rng, 80, 10)
    x, _, res = conjugate_gradient(sp.csr_matrix(A), s.f, tol=1e-12)
    assert np.allclose(A @ x, s.f, atol=1e-9)


def test_fixed_point_rigid_translation():
    body = icosphere(1.0, 2)
    g, q = _quad(body, body.positions + [1.0, 0, 0])
    sysm = assemble_system(g, q, 1.0, 0.01, 500.0)
    u, p, info = fixed_point_solve(g, sysm, cg_tol=1e-10)
    assert info.iterations == 1 and info.converged
    assert np.abs(u - [1.0, 0, 0]).max() < 1e-6
    k, J = volume_bias(g, u, sysm.B)
    assert np.abs(J - 1).max() < 1e-6
    assert np.abs(k).max() < 1e-9 * g.cell_volume


def test_fixed_point_shrink_compresses_and_biases():
    body = icosphere(1.0, 2)
    g, q = _quad(body, 0.9 * body.positions)
    sysm = assemble_system(g, q, 1.0, 0.01, 500.0)
    u, _, info = fixed_point_solve(g, sysm)
    J = np.linalg.det(cell_deformation(g, u))
    assert J.min() < 1.0
    k, _ = volume_bias(g, u, sysm.B)
    compressed = J < 1
    assert np.abs(k[compressed]).max() > 0
    # independent evaluation of the bias: vol * (1 - J) + integrated div u
    div = sysm.B @ u.ravel()
    assert np.allclose(k[compressed], g.cell_volume * (1 - J[compressed]) + div[compressed])
    assert np.all(k[~compressed] == 0)


def _expansion_deviation(s):
    body = icosphere(1.0, 2)
    g, q = _quad(body, (1 + s) * body.positions)
    sysm = assemble_system(g, q, 1.0, 0.01, 500.0)
    u, _, _ = fixed_point_solve(g, sysm, cg_tol=1e-10)
    lin, _, _, _ = solve_schur(sysm, np.zeros(g.n_cells), tol=1e-10)
    return np.abs(u.ravel() - lin).max() / np.abs(lin).max()


def test_fixed_point_expansion_departs_from_linear_solve_at_second_order():
    # a nearly divergence-free radial expansion still has det(I + grad u) = 1 - O(|grad u|^2),
    # so the unilateral term only switches on at second order
    d10, d5 = _expansion_deviation(0.1), _expansion_deviation(0.05)
    assert d10 < 0.1
    assert d5 < 0.6 * d10


def test_transfer_identity_leaves_garment():
    body = icosphere(10.0, 3)
    tube = tube_garment(8.5, 4.0, 24, 3, y0=5.0)
    moved, est = transfer_garment(tube, body, body)
    assert np.abs(moved.mesh3d.positions - tube.mesh3d.positions).max() < 1e-6
    assert est.report_.converged


def test_transfer_rigid_translation():
    body = icosphere(10.0, 2)
    tube = tube_garment(8.5, 4.0, 24, 3, y0=5.0)
    t = np.array([0.3, -0.2, 0.1])
    moved, _ = transfer_garment(tube, body, body.translated(t))
    assert np.abs(moved.mesh3d.positions - (tube.mesh3d.positions + t)).max() < 1e-4


def test_transfer_sphere_to_ellipsoid_converges():
    body = icosphere(10.0, 2)
    target = body.positions * [1.3, 1.0, 0.85]
    est = GarmentTransfer(band_width=6.0).fit(body, target)
    assert est.report_.converged and est.report_.outer_iterations <= 6
    gap = np.linalg.norm(est.displaced_body_.positions - target, axis=1).max()
    assert gap <= 0.5


def test_sample_displacement_reproduces_trilinear_field(sphere, rng):
    g = activate_band(sphere, 0.5, 1.0)
    c = rng.normal(size=(3, 3))
    u = g.node_positions() @ c.T
    P = g.cell_centers()[:30] + rng.uniform(-0.2, 0.2, size=(30, 3))
    d, _ = sample_displacement(g, u, P)
    assert np.allclose(d, P @ c.T, atol=1e-12)


@given(st.integers(0, 10000), st.integers(5, 120), st.integers(1, 40))
def test_schur_solution_satisfies_block_equations(seed, n, m):
    rng = np.random.default_rng(seed)
    s, A, B = random_block_system(rng, n, m)
    k = rng.normal(size=m)
    u, p, _, _ = solve_schur(s, k, tol=1e-12)
    assert np.allclose(A @ u - B.T @ p, s.f, atol=1e-8 * max(1.0, np.abs(s.f).max()))
    assert np.allclose(B @ u + s.C * p, k, atol=1e-8)
