"""Quadratic frame energy on the layout and per-vertex boundary edge energies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import PatternError
from ..mesh import PatternLayout2D, boundary_edges, unique_edges
from ..seams import SeamSpec
from .frames import EDGE_SELECT, edge_matrices

DEFAULT_EPSILON = 1e-8


@dataclass(frozen=True, eq=False)
class BaseQuadratic:
    """``E(x) = 1/2 tr(x^T L x) - tr(b^T x) + c`` for layouts ``x`` of shape (N, 2)."""

    L: sp.csr_matrix
    b: np.ndarray
    c: float

    def energy(self, x):
        return 0.5 * np.sum(x * (self.L @ x)) - np.sum(self.b * x) + self.c

    def gradient(self, x):
        return self.L @ x - self.b

    def minimizer(self):
        return sp.linalg.spsolve(self.L.tocsc(), self.b)


def frame_weights(B):
    """``W_t = G B_t`` (T, 3, 2) so that the 2D frame of triangle t is ``x_t^T W_t``."""
    return np.einsum("kj,tji->tki", EDGE_SELECT, B)


def base_quadratic(layout: PatternLayout2D, B, epsilon=DEFAULT_EPSILON, anchor=None):
    """Assemble ``1/2 sum_t A_t |F_t - I|^2 + 1/2 eps sum_v |p_v - p0_v|^2``.

    ``F_t = x_t^T W_t`` is linear in the layout, so the form is exact. Areas
    are rest 2D areas; ``anchor`` (default: the layout itself) is ``p0``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    T = layout.triangles
    n = len(layout.positions2d)
    p0 = layout.positions2d if anchor is None else np.asarray(anchor, float)
    E2 = edge_matrices(layout.positions2d, T)
    area = 0.5 * np.abs(E2[:, 0, 0] * E2[:, 1, 1] - E2[:, 0, 1] * E2[:, 1, 0])
    W = frame_weights(B)
    local = area[:, None, None] * np.einsum("tki,tli->tkl", W, W)
    rows = np.repeat(T, 3, axis=1).ravel()
    cols = np.tile(T, (1, 3)).ravel()
    L = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    L = (L + epsilon * sp.identity(n, format="csr")).tocsr()
    b = np.zeros((n, 2))
    for r in range(2):
        # rows of F_t - I: x_t[:, r] . W_t[:, :, r'] against delta(r, r')
        np.add.at(b[:, r], T.ravel(), (area[:, None] * W[:, :, r]).ravel())
    b += epsilon * p0
    c = float(area.sum() + 0.5 * epsilon * np.sum(p0 * p0))
    return BaseQuadratic(L, b, c)


def base_energy(x, layout: PatternLayout2D, B, epsilon=DEFAULT_EPSILON, anchor=None):
    """Value, gradient and Hessian (sparse, shared by both coordinates) of the frame energy."""
    q = base_quadratic(layout, B, epsilon, anchor)
    return q.energy(x), q.gradient(x), q.L


@dataclass(frozen=True, eq=False)
class EdgeNeighborhoods:
    """Boundary and seam-line vertices with their two neighbor vectors.

    ``nbr[i] = (a, b)``: neighbor vectors are ``x_a - x_i`` and ``x_b - x_i``.
    ``rest`` holds the (k, 4) stacked rest vectors; ``group`` ties sewn vertices.
    """

    vertex: np.ndarray
    nbr: np.ndarray
    rest: np.ndarray
    length: np.ndarray
    group: np.ndarray

    def __len__(self):
        return len(self.vertex)

    @property
    def n_groups(self):
        return int(self.group.max()) + 1 if len(self.group) else 0

    def selector(self, n_vertices):
        """Sparse D (4k, N) per coordinate: rows 2i, 2i+1 give the two neighbor differences."""
        k = len(self.vertex)
        rows = np.repeat(np.arange(2 * k), 2)
        cols = np.stack([self.nbr.ravel(), np.repeat(self.vertex, 2)], axis=1).ravel()
        vals = np.tile([1.0, -1.0], 2 * k)
        return sp.coo_matrix((vals, (rows, cols)), shape=(2 * k, n_vertices)).tocsr()

    def vectors(self, x):
        """Stacked neighbor vectors (k, 4) ``[z0x, z0y, z1x, z1y]``."""
        z0 = x[self.nbr[:, 0]] - x[self.vertex]
        z1 = x[self.nbr[:, 1]] - x[self.vertex]
        return np.concatenate([z0, z1], axis=1)


def edge_neighborhoods(layout: PatternLayout2D, seams: SeamSpec, include_seam_lines=True):
    """Collect constrained vertices along panel borders (and interior seam lines)."""
    x = layout.positions2d
    n = len(x)
    line_edges = [np.sort(boundary_edges(layout.triangles), axis=1)]
    if include_seam_lines and seams.n_groups:
        on_seam = np.zeros(n, dtype=bool)
        on_seam[seams.members()] = True
        edges, _ = unique_edges(layout.triangles)
        line_edges.append(edges[on_seam[edges[:, 0]] & on_seam[edges[:, 1]]])
    E = np.unique(np.concatenate(line_edges), axis=0) if len(line_edges[0]) else np.zeros((0, 2), int)
    nbrs = [[] for _ in range(n)]
    border = set(map(tuple, np.sort(boundary_edges(layout.triangles), axis=1).tolist()))
    # border neighbors first so corner junctions follow the panel outline
    for a, b in sorted(E.tolist(), key=lambda e: (tuple(e) not in border, e)):
        nbrs[a].append(b)
        nbrs[b].append(a)
    verts = np.array([i for i in range(n) if nbrs[i]], dtype=np.int64)
    nb = np.array([[nbrs[i][0], nbrs[i][1] if len(nbrs[i]) > 1 else nbrs[i][0]] for i in verts],
                  dtype=np.int64).reshape(-1, 2)
    rest = np.concatenate([x[nb[:, 0]] - x[verts], x[nb[:, 1]] - x[verts]], axis=1) \
        if len(verts) else np.zeros((0, 4))
    length = 0.5 * (np.linalg.norm(rest[:, :2], axis=1) + np.linalg.norm(rest[:, 2:], axis=1))
    if np.any(length <= 0):
        bad = verts[length <= 0]
        raise PatternError(f"boundary vertex {int(bad[0])} has zero-length rest neighbors")
    gid_v = seams.group_of(n)
    group = np.empty(len(verts), dtype=np.int64)
    next_id = seams.n_groups
    for j, v in enumerate(verts):
        if gid_v[v] >= 0:
            group[j] = gid_v[v]
        else:
            group[j] = next_id
            next_id += 1
    _, group = np.unique(group, return_inverse=True)
    return EdgeNeighborhoods(verts, nb, rest, length, group.ravel())


def edge_scale_and_energy(z, rest, L):
    """Closed-form scale ``S`` and energy ``W = 1/2 L |z - S z^r|^2`` for one or several tied vertices.

    ``z`` and ``rest`` are (k, 4) stacked neighbor vectors (or a single 4-vector),
    ``L`` their weights. One scale is fitted over all rows. Returns
    ``(S, W, dW/dz)``; the gradient holds ``S`` fixed, which is exact at the optimum.
    """
    z = np.atleast_2d(np.asarray(z, float))
    rest = np.atleast_2d(np.asarray(rest, float))
    L = np.atleast_1d(np.asarray(L, float))
    denom = np.sum(L * np.sum(rest * rest, axis=1))
    if denom <= 0:
        raise PatternError("edge energy needs a non-zero rest vector")
    S = float(np.sum(L * np.sum(z * rest, axis=1)) / denom)
    r = z - S * rest
    W = 0.5 * float(np.sum(L * np.sum(r * r, axis=1)))
    return S, W, L[:, None] * r


def edge_energy(x, hood: EdgeNeighborhoods, weight=1.0):
    """Total tied-scale edge energy of layout ``x``."""
    z = hood.vectors(x)
    total = 0.0
    for g in range(hood.n_groups):
        m = hood.group == g
        total += edge_scale_and_energy(z[m], hood.rest[m], weight * hood.length[m])[1]
    return total
