"""Indexed triangle meshes in 3D and paired 2D pattern layouts.

All lengths are centimeters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_points, check_triangles
from .errors import ValidationError

MIN_TRIANGLE_AREA = 1e-12


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def triangle_areas(positions, triangles):
    p = positions[triangles]
    c = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    if c.ndim == 1:  # 2D input
        return 0.5 * np.abs(c)
    return 0.5 * np.linalg.norm(c, axis=1)


def signed_areas_2d(positions2d, triangles):
    p = positions2d[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def face_normals(positions, triangles):
    p = positions[triangles]
    c = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    n = np.linalg.norm(c, axis=1, keepdims=True)
    return c / np.where(n > 0, n, 1.0)


def area_weighted_vertex_normals(positions, triangles):
    """Unit vertex normals as the area-weighted sum of incident face normals."""
    p = positions[triangles]
    c = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])  # |c| = 2 * area
    acc = np.zeros_like(positions)
    for k in range(3):
        np.add.at(acc, triangles[:, k], c)
    n = np.linalg.norm(acc, axis=1, keepdims=True)
    return acc / np.where(n > 0, n, 1.0)


def unique_edges(triangles):
    """Sorted (a < b) undirected edges and, per edge, its incident triangle count."""
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e = np.sort(e, axis=1)
    edges, counts = np.unique(e, axis=0, return_counts=True)
    return edges, counts


def boundary_edges(triangles):
    """Directed boundary half-edges (a, b) following triangle orientation."""
    he = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    key = np.sort(he, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return he[counts[inv.ravel()] == 1]


def vertex_adjacency(n_vertices, triangles):
    """CSR-style vertex neighbor lists (indptr, indices) from mesh edges."""
    import scipy.sparse as sp

    edges, _ = unique_edges(triangles)
    if len(edges) == 0:
        return np.zeros(n_vertices + 1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_vertices, n_vertices))
    adj.sort_indices()
    return adj.indptr.astype(np.int64), adj.indices.astype(np.int64)


@dataclass(frozen=True, eq=False)
class TriMesh3:
    """Indexed triangle mesh. Arrays are copied and made read-only."""

    positions: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        pos = check_points(self.positions, 3, "positions")
        tri = check_triangles(self.triangles, len(pos))
        if len(tri):
            areas = triangle_areas(pos, tri)
            bad = np.flatnonzero(areas <= MIN_TRIANGLE_AREA)
            if bad.size:
                raise ValidationError(
                    f"degenerate triangle {int(bad[0])} (area {areas[bad[0]]:.3g} cm^2)"
                )
        object.__setattr__(self, "positions", _frozen(pos))
        object.__setattr__(self, "triangles", _frozen(tri))
        if self.normals is not None:
            nrm = check_points(self.normals, 3, "normals")
            if nrm.shape != pos.shape:
                raise ValidationError("normals must match positions in shape")
            if np.any(np.abs(np.linalg.norm(nrm, axis=1) - 1.0) > 1e-6):
                raise ValidationError("normals must be unit length")
            object.__setattr__(self, "normals", _frozen(nrm))

    @property
    def n_vertices(self):
        return len(self.positions)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def triangle_areas(self):
        return triangle_areas(self.positions, self.triangles)

    def face_normals(self):
        return face_normals(self.positions, self.triangles)

    def vertex_normals(self):
        if self.normals is not None:
            return self.normals
        return area_weighted_vertex_normals(self.positions, self.triangles)

    def with_positions(self, positions):
        return TriMesh3(positions, self.triangles)

    def translated(self, t):
        return self.with_positions(self.positions + np.asarray(t, dtype=float))

    def bounds(self):
        return self.positions.min(axis=0), self.positions.max(axis=0)


@dataclass(frozen=True, eq=False)
class PatternLayout2D:
    """2D sewing-pattern layout sharing its triangulation with a 3D mesh."""

    positions2d: np.ndarray
    triangles: np.ndarray
    panel_id: np.ndarray

    def __post_init__(self):
        pos = check_points(self.positions2d, 2, "positions2d")
        tri = check_triangles(self.triangles, len(pos))
        pid = np.asarray(self.panel_id, dtype=np.int64).ravel()
        if pid.shape != (len(pos),):
            raise ValidationError("panel_id must have one entry per vertex")
        if len(tri):
            pt = pid[tri]
            mixed = np.flatnonzero((pt[:, 0] != pt[:, 1]) | (pt[:, 0] != pt[:, 2]))
            if mixed.size:
                raise ValidationError(f"triangle {int(mixed[0])} spans several panels")
            sa = signed_areas_2d(pos, tri)
            bad = np.flatnonzero(sa <= MIN_TRIANGLE_AREA)
            if bad.size:
                raise ValidationError(
                    f"2D triangle {int(bad[0])} has non-positive signed area {sa[bad[0]]:.3g}"
                )
        object.__setattr__(self, "positions2d", _frozen(pos))
        object.__setattr__(self, "triangles", _frozen(tri))
        object.__setattr__(self, "panel_id", _frozen(pid))

    @property
    def panels(self):
        return np.unique(self.panel_id)

    def with_positions(self, positions2d):
        return PatternLayout2D(positions2d, self.triangles, self.panel_id)


def check_paired(mesh3d: TriMesh3, layout2d: PatternLayout2D):
    if mesh3d.n_vertices != len(layout2d.positions2d):
        raise ValidationError("3D mesh and 2D layout differ in vertex count")
    if not np.array_equal(mesh3d.triangles, layout2d.triangles):
        raise ValidationError("3D mesh and 2D layout triangulations differ")
