"""Discretization of the viscous, weakly compressible transfer flow on the band grid.

Displacements are trilinear on grid nodes, pressure is constant per cell.
The linear system couples them as

    [ A  -B^T ] [u]   [f]
    [ B   C   ] [p] = [k]

with ``(Bu)_c`` the integral of ``div u`` over cell ``c`` and ``C`` a diagonal
compliance. Eliminating ``p`` gives ``(A + B^T C^-1 B) u = f + B^T C^-1 k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..bvh import TriangleBVH, cells_touching_mesh, closest_points, winding_number
from ..errors import ConfigurationError
from ..mesh import TriMesh3
from .grid import SparseDisplacementGrid, shape_gradients, shape_values


def gauss_points(order):
    """Gauss-Legendre points and weights on [0, 1]^3."""
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    WX, WY, WZ = np.meshgrid(w, w, w, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    return pts, (WX * WY * WZ).ravel()


def viscosity_element(h, viscosity=1.0):
    """24x24 matrix of ``nu * int D(u):D(v)`` over one cell; dofs ordered ``3*l + i``."""
    xi, w = gauss_points(2)
    dN = shape_gradients(xi, h)
    K = np.zeros((24, 24))
    for g in range(len(xi)):
        G = np.zeros((3, 3, 24))
        for l in range(8):
            for i in range(3):
                G[i, :, 3 * l + i] = dN[g, l]
        S = 0.5 * (G + G.transpose(1, 0, 2))
        S = S.reshape(9, 24)
        K += w[g] * h ** 3 * (S.T @ S)
    return viscosity * K


def divergence_element(h):
    """Row of 24 weights giving ``int div u`` over one cell."""
    xi, w = gauss_points(2)
    dN = shape_gradients(xi, h)
    return (h ** 3 * np.einsum("g,gli->li", w, dN)).reshape(24)


def cell_dofs(grid: SparseDisplacementGrid):
    return (3 * grid.cell_nodes[:, :, None] + np.arange(3)).reshape(grid.n_cells, 24)


@dataclass(frozen=True, eq=False)
class BoundaryQuadrature:
    """Penalty samples: each row ties ``u`` at ``eval_points`` to ``targets``."""

    cells: np.ndarray
    points: np.ndarray
    eval_points: np.ndarray
    inside: np.ndarray
    targets: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.points)


def boundary_cells(grid: SparseDisplacementGrid, body: TriMesh3, bvh: TriangleBVH | None = None):
    """Indices of active cells whose box intersects the body surface."""
    bvh = bvh or TriangleBVH.build(body)
    hit = cells_touching_mesh(grid.cell_centers(), 0.5 * grid.cell_size, body, bvh)
    return np.flatnonzero(hit)


def build_boundary_quadrature(grid: SparseDisplacementGrid, source: TriMesh3, target_positions,
                              order=2, bvh: TriangleBVH | None = None) -> BoundaryQuadrature:
    """Quadrature over boundary cells prescribing the body's source-to-target displacement.

    Points inside the body are constrained where they are; points outside
    are constrained at their closest point on the body.
    """
    bvh = bvh or TriangleBVH.build(source)
    cells = boundary_cells(grid, source, bvh)
    xi, w = gauss_points(order)
    h = grid.cell_size
    base = grid.origin + h * grid.cells[cells]
    pts = (base[:, None, :] + h * xi[None, :, :]).reshape(-1, 3)
    cell_of = np.repeat(cells, len(xi))
    weights = np.tile(w * h ** 3, len(cells))
    proj, tri, bary, _ = closest_points(pts, source, bvh)
    wind = winding_number(pts, source, bvh)
    inside = wind > 0.5
    evalp = np.where(inside[:, None], pts, proj)
    disp = np.asarray(target_positions, float) - source.positions
    corners = source.triangles[tri]
    g = np.einsum("nk,nkd->nd", bary, disp[corners])
    return BoundaryQuadrature(cell_of, pts, evalp, inside, g, weights)


@dataclass(frozen=True, eq=False)
class BlockSystem:
    """Sparse blocks of the coupled displacement/pressure system."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    C: np.ndarray
    f: np.ndarray

    @property
    def n_dofs(self):
        return self.A.shape[0]

    def schur_matrix(self):
        return (self.A + self.B.T @ sp.diags(1.0 / self.C) @ self.B).tocsr()

    def schur_rhs(self, k):
        return self.f + self.B.T @ (k / self.C)

    def pressure(self, u, k):
        return (k - self.B @ u) / self.C

    def energy(self, u, k):
        r = k - self.B @ u
        return 0.5 * u @ (self.A @ u) - self.f @ u + 0.5 * r @ (r / self.C)


def penalty_terms(grid: SparseDisplacementGrid, quad: BoundaryQuadrature, weight):
    """Penalty matrix and load vector from the boundary quadrature."""
    n = 3 * grid.n_nodes
    if len(quad) == 0:
        return sp.csr_matrix((n, n)), np.zeros(n)
    idx, xi = grid.locate(quad.eval_points)
    # an outside projection can land in an inactive cell; fall back to the sample's own cell
    miss = idx < 0
    if miss.any():
        idx[miss] = quad.cells[miss]
        own = quad.points[miss]
        xi[miss] = (own - grid.origin) / grid.cell_size - grid.cells[quad.cells[miss]]
    N = shape_values(xi)
    nodes = grid.cell_nodes[idx]
    wN = weight * quad.weights[:, None] * N
    rows = []
    cols = []
    vals = []
    f = np.zeros(n)
    for i in range(3):
        d = 3 * nodes + i
        rows.append(np.repeat(d, 8, axis=1).ravel())
        cols.append(np.tile(d, (1, 8)).ravel())
        vals.append((wN[:, :, None] * N[:, None, :]).ravel())
        np.add.at(f, d.ravel(), (wN * quad.targets[:, i:i + 1]).ravel())
    P = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    return P, f


def assemble_system(grid: SparseDisplacementGrid, quad: BoundaryQuadrature, viscosity,
                    compliance, penalty) -> BlockSystem:
    if len(quad) == 0:
        raise ConfigurationError(
            "no grid cell touches the body, so the displacement is unconstrained; "
            "increase band_width or reduce cell_size"
        )
    n = 3 * grid.n_nodes
    dofs = cell_dofs(grid)
    Ke = viscosity_element(grid.cell_size, viscosity)
    rows = np.repeat(dofs, 24, axis=1).ravel()
    cols = np.tile(dofs, (1, 24)).ravel()
    vals = np.tile(Ke.ravel(), grid.n_cells)
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    P, f = penalty_terms(grid, quad, penalty)
    De = divergence_element(grid.cell_size)
    B = sp.coo_matrix((np.tile(De, grid.n_cells),
                       (np.repeat(np.arange(grid.n_cells), 24), dofs.ravel())),
                      shape=(grid.n_cells, n)).tocsr()
    C = np.full(grid.n_cells, compliance * grid.cell_volume)
    # duplicate summation order differs between (i, j) and (j, i); average for exact symmetry
    A = A + P
    return BlockSystem((0.5 * (A + A.T)).tocsr(), B, C, f)


def cell_deformation(grid: SparseDisplacementGrid, u):
    """Deformation gradient ``I + grad u`` at each cell center: (C, 3, 3)."""
    dN = shape_gradients(np.full((1, 3), 0.5), grid.cell_size)[0]
    Uc = u[grid.cell_nodes]
    return np.eye(3) + np.einsum("cli,lj->cij", Uc, dN)


def volume_bias(grid: SparseDisplacementGrid, u, B, active=None):
    """Gap between the compression measure and its linearization, in compressed cells only.

    With ``J = det(I + grad u)`` the compression is ``-min(0, J - 1)`` and its
    linearization is ``-div u``. The bias is zero outside ``active`` (by
    default the cells with ``J < 1``). Returns ``(k, J)``.
    """
    J = np.linalg.det(cell_deformation(grid, u))
    if active is None:
        active = J < 1.0
    k = np.zeros(grid.n_cells)
    k[active] = grid.cell_volume * (1.0 - J[active]) + (B @ u.ravel())[active]
    return k, J
