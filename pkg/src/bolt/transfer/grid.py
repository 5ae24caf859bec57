"""Sparse narrow-band lattice around the body carrying displacement and pressure."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from ..bvh import TriangleBVH, closest_points
from ..errors import ConfigurationError
from ..mesh import TriMesh3

log = logging.getLogger(__name__)

# corner l of a cell sits at lattice offset CORNERS[l]
CORNERS = np.array([[(l >> 2) & 1, (l >> 1) & 1, l & 1] for l in range(8)], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class SparseDisplacementGrid:
    """Active cells of a regular lattice within ``band_width`` of the body.

    ``cells`` and ``nodes`` are integer lattice coordinates relative to
    ``origin``; ``cell_nodes[c, l]`` indexes the node at corner ``l`` of cell ``c``.
    """

    origin: np.ndarray
    cell_size: float
    band_width: float
    shape: tuple
    cells: np.ndarray
    cell_nodes: np.ndarray
    nodes: np.ndarray
    cell_lookup: np.ndarray
    cell_distance: np.ndarray

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def cell_volume(self):
        return self.cell_size ** 3

    def cell_centers(self):
        return self.origin + self.cell_size * (self.cells + 0.5)

    def node_positions(self):
        return self.origin + self.cell_size * self.nodes

    def zero_displacement(self):
        return np.zeros((self.n_nodes, 3))

    def zero_pressure(self):
        return np.zeros(self.n_cells)

    def locate(self, points):
        """Active cell index per point (``-1`` when outside the band) and local coordinates."""
        g = (np.asarray(points, float) - self.origin) / self.cell_size
        ijk = np.floor(g).astype(np.int64)
        xi = g - ijk
        shape = np.asarray(self.shape)
        ok = np.all((ijk >= 0) & (ijk < shape), axis=1)
        idx = np.full(len(g), -1, dtype=np.int64)
        if ok.any():
            q = ijk[ok]
            idx[ok] = self.cell_lookup[q[:, 0], q[:, 1], q[:, 2]]
        return idx, xi


def shape_values(xi):
    """Trilinear shape functions at local coordinates ``xi`` (n, 3) -> (n, 8)."""
    xi = np.atleast_2d(xi)
    out = np.ones((len(xi), 8))
    for l in range(8):
        for k in range(3):
            out[:, l] *= xi[:, k] if CORNERS[l, k] else 1.0 - xi[:, k]
    return out


def shape_gradients(xi, h):
    """Physical gradients of the trilinear shape functions: (n, 8, 3)."""
    xi = np.atleast_2d(xi)
    out = np.ones((len(xi), 8, 3))
    for l in range(8):
        for j in range(3):
            for k in range(3):
                if k == j:
                    out[:, l, j] *= (1.0 if CORNERS[l, k] else -1.0)
                else:
                    out[:, l, j] *= xi[:, k] if CORNERS[l, k] else 1.0 - xi[:, k]
    return out / h


def activate_band(body: TriMesh3, cell_size, band_width, bvh: TriangleBVH | None = None):
    """Cells whose center lies within ``band_width`` of the body surface."""
    if not cell_size > 0:
        raise ConfigurationError("cell_size must be > 0")
    if band_width < 2 * cell_size:
        raise ConfigurationError(
            f"band_width ({band_width}) must be at least twice the cell size ({cell_size})"
        )
    bvh = bvh or TriangleBVH.build(body)
    lo, hi = body.bounds()
    h = float(cell_size)
    origin = np.floor((lo - band_width) / h) * h - h
    shape = tuple(int(s) for s in np.ceil((hi + band_width - origin) / h).astype(int) + 1)
    I, J, K = np.meshgrid(*(np.arange(s) for s in shape), indexing="ij")
    cand = np.stack([I.ravel(), J.ravel(), K.ravel()], axis=1)
    centers = origin + h * (cand + 0.5)
    _, _, _, dist = closest_points(centers, body, bvh)
    keep = dist <= band_width
    if not keep.any():
        raise ConfigurationError("no grid cell lies within the band; widen band_width")
    cells = cand[keep]
    lookup = np.full(shape, -1, dtype=np.int64)
    lookup[cells[:, 0], cells[:, 1], cells[:, 2]] = np.arange(len(cells))
    corners = (cells[:, None, :] + CORNERS[None, :, :]).reshape(-1, 3)
    nodes, inv = np.unique(corners, axis=0, return_inverse=True)
    cell_nodes = inv.reshape(len(cells), 8)
    grid = SparseDisplacementGrid(origin, h, float(band_width), shape, cells, cell_nodes,
                                  nodes, lookup, dist[keep])
    n_comp = _component_count(grid)
    if n_comp > 1:
        log.warning("active band splits into %d disconnected pieces", n_comp)
    return grid


def _component_count(grid):
    rows, cols = [], []
    for axis in range(3):
        step = np.zeros(3, dtype=np.int64)
        step[axis] = 1
        nb = grid.cells + step
        ok = np.all(nb < np.asarray(grid.shape), axis=1)
        j = np.full(len(nb), -1)
        j[ok] = grid.cell_lookup[nb[ok, 0], nb[ok, 1], nb[ok, 2]]
        m = j >= 0
        rows.append(np.flatnonzero(m))
        cols.append(j[m])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    adj = coo_matrix((np.ones(len(r)), (r, c)), shape=(grid.n_cells, grid.n_cells))
    n, _ = connected_components(adj, directed=False)
    return n


def sample_displacement(grid: SparseDisplacementGrid, u, points):
    """Trilinear displacement at ``points``; points outside the band take the nearest node's value.

    Returns (displacements, number_of_clamped_points).
    """
    points = np.atleast_2d(np.asarray(points, float))
    idx, xi = grid.locate(points)
    out = np.empty((len(points), 3))
    inside = idx >= 0
    if inside.any():
        N = shape_values(xi[inside])
        out[inside] = np.einsum("nl,nlk->nk", N, u[grid.cell_nodes[idx[inside]]])
    n_out = int((~inside).sum())
    if n_out:
        tree = cKDTree(grid.node_positions())
        _, nn = tree.query(points[~inside])
        out[~inside] = u[nn]
    return out, n_out
