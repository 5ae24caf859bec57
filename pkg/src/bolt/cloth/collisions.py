"""Velocity impulses for cloth-cloth proximity and for the collision SDF."""

from __future__ import annotations

import logging
import math

import numpy as np
from numba import njit

from ..bvh import TriangleBVH, closest_points, proximity_pairs
from ..geometry import _JIT, cross3, dot3
from ..mesh import TriMesh3
from ..sdf import SampledSDF, sample

log = logging.getLogger(__name__)


def filter_pairs(pairs, T, vertex_group):
    """Drop triangle pairs that share a vertex or are joined through a seam group."""
    if len(pairs) == 0:
        return np.zeros(0, dtype=bool)
    A = T[pairs.tri_a]
    B = T[pairs.tri_b]
    shared = np.any(A[:, :, None] == B[:, None, :], axis=(1, 2))
    ga = vertex_group[A]
    gb = vertex_group[B]
    sewn = np.any((ga[:, :, None] == gb[:, None, :]) & (ga[:, :, None] >= 0), axis=(1, 2))
    return ~(shared | sewn)


@njit(**_JIT)
def _contact_impulse(vn, vt_norm, pen, w, dt, k, kd, mu, clamp):
    """Normal and friction impulse magnitudes for one contact with inverse effective mass w."""
    jn = dt * (k * pen - kd * vn)
    if clamp:
        jmax = (pen / dt - vn) / w
        if jn > jmax:
            jn = jmax
    if jn <= 0.0:
        return 0.0, 0.0
    jt = min(mu * jn, vt_norm / w)
    return jn, jt


@njit(**_JIT)
def apply_cloth_impulses(X, V, inv_mass, T, ta, tb, pa, pb, ba, bb, dt, thickness, k, kd, mu,
                         clamp):
    """Sequential equal-and-opposite impulses for proximal triangle pairs; modifies V.

    Returns the number of pairs that received an impulse.
    """
    count = 0
    for c in range(ta.shape[0]):
        d = pa[c] - pb[c]
        dist = math.sqrt(dot3(d, d))
        pen = thickness - dist
        if pen <= 0.0:
            continue
        A = T[ta[c]]
        B = T[tb[c]]
        if dist > 1e-12:
            n = d / dist
        else:
            n = cross3(X[B[1]] - X[B[0]], X[B[2]] - X[B[0]])
            n = n / max(math.sqrt(dot3(n, n)), 1e-300)
            ca = (X[A[0]] + X[A[1]] + X[A[2]]) / 3.0
            cb = (X[B[0]] + X[B[1]] + X[B[2]]) / 3.0
            if dot3(ca - cb, n) < 0.0:
                n = -n
        va = np.zeros(3)
        vb = np.zeros(3)
        w = 0.0
        for i in range(3):
            va += ba[c, i] * V[A[i]]
            vb += bb[c, i] * V[B[i]]
            w += ba[c, i] ** 2 * inv_mass[A[i]] + bb[c, i] ** 2 * inv_mass[B[i]]
        if w <= 0.0:
            continue
        vr = va - vb
        vn = dot3(vr, n)
        vt = vr - vn * n
        vtn = math.sqrt(dot3(vt, vt))
        jn, jt = _contact_impulse(vn, vtn, pen, w, dt, k, kd, mu, clamp)
        if jn == 0.0:
            continue
        J = jn * n
        if vtn > 0.0:
            J = J - jt * vt / vtn
        for i in range(3):
            V[A[i]] += ba[c, i] * inv_mass[A[i]] * J
            V[B[i]] -= bb[c, i] * inv_mass[B[i]] * J
        count += 1
    return count


def cloth_cloth_impulses(X, V, inv_mass, T, vertex_group, bvh: TriangleBVH, dt, thickness, params,
                         clamp=True):
    """Detect self proximity within ``thickness`` and apply impulses in place.

    Returns (pairs_tested, pairs_with_impulse).
    """
    mesh = TriMesh3(X, T)
    pairs = proximity_pairs(bvh, mesh, bvh, mesh, thickness, skip_adjacent=True)
    keep = filter_pairs(pairs, T, vertex_group)
    if not keep.any():
        return 0, 0
    n = apply_cloth_impulses(X, V, inv_mass, T, pairs.tri_a[keep], pairs.tri_b[keep],
                             pairs.point_a[keep], pairs.point_b[keep], pairs.bary_a[keep],
                             pairs.bary_b[keep], dt, thickness, params.force_coefficient,
                             params.damping_coefficient, params.friction_coefficient, clamp)
    return int(keep.sum()), int(n)


def _vertex_impulses(V, inv_mass, idx, normals, depth, dt, params, clamp):
    m_inv = inv_mass[idx]
    ok = m_inv > 0
    idx, normals, depth, m_inv = idx[ok], normals[ok], depth[ok], m_inv[ok]
    v = V[idx]
    vn = np.einsum("ij,ij->i", v, normals)
    vt = v - vn[:, None] * normals
    vtn = np.linalg.norm(vt, axis=1)
    jn = dt * (params.force_coefficient * depth - params.damping_coefficient * vn)
    if clamp:
        jn = np.minimum(jn, (depth / dt - vn) / m_inv)
    jn = np.maximum(jn, 0.0)
    jt = np.minimum(params.friction_coefficient * jn, vtn / m_inv)
    tdir = np.where(vtn[:, None] > 0, vt / np.where(vtn > 0, vtn, 1.0)[:, None], 0.0)
    dv = m_inv[:, None] * (jn[:, None] * normals - jt[:, None] * tdir)
    V[idx] += dv
    return int(np.count_nonzero(jn))


def sdf_impulses(X, V, inv_mass, sdf: SampledSDF, dt, params, prev_normals=None, clamp=True):
    """Push vertices with negative SDF value back out along the sampled gradient.

    ``prev_normals`` (N, 3), when given, supplies the fallback direction for a
    zero gradient and is updated with the normals used. Returns
    (number of impulses, max penetration depth).
    """
    phi, grad = sample(sdf, X)
    inside = np.flatnonzero(phi < 0)
    if inside.size == 0:
        return 0, 0.0
    g = grad[inside]
    gn = np.linalg.norm(g, axis=1)
    normals = np.empty_like(g)
    good = gn > 1e-12
    normals[good] = g[good] / gn[good, None]
    if (~good).any():
        log.warning("%d penetrating vertices have a zero SDF gradient; reusing previous normals",
                    int((~good).sum()))
        if prev_normals is None:
            fb = np.tile([0.0, 1.0, 0.0], ((~good).sum(), 1))
        else:
            fb = prev_normals[inside[~good]]
        normals[~good] = fb
    if prev_normals is not None:
        prev_normals[inside] = normals
    n = _vertex_impulses(V, inv_mass, inside, normals, -phi[inside], dt, params, clamp)
    return n, float(-phi[inside].min())


def mesh_impulses(X, V, inv_mass, mesh: TriMesh3, bvh: TriangleBVH, dt, thickness, params,
                  skip=None, clamp=True):
    """Keep vertices ``thickness`` away from a frozen mesh; the mesh does not move.

    Vertices flagged in ``skip`` (for instance, already handled by the SDF)
    are ignored. Returns the number of impulses.
    """
    p, _, _, d = closest_points(X, mesh, bvh)
    near = (d < thickness) & (d > 1e-12)
    if skip is not None:
        near &= ~skip
    idx = np.flatnonzero(near)
    if idx.size == 0:
        return 0
    normals = (X[idx] - p[idx]) / d[idx, None]
    return _vertex_impulses(V, inv_mass, idx, normals, thickness - d[idx], dt, params, clamp)
