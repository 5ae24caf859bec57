"""Scalar geometric kernels (numba-compiled).

Closest points follow Ericson, *Real-Time Collision Detection* (2004).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def dot3(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


@njit(**_JIT)
def cross3(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(**_JIT)
def closest_point_triangle(p, a, b, c):
    """Closest point to ``p`` on triangle abc and its barycentric coordinates."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = dot3(ab, ap)
    d2 = dot3(ac, ap)
    if d1 <= 0.0 and d2 <= 0.0:
        return a.copy(), 1.0, 0.0, 0.0
    bp = p - b
    d3 = dot3(ab, bp)
    d4 = dot3(ac, bp)
    if d3 >= 0.0 and d4 <= d3:
        return b.copy(), 0.0, 1.0, 0.0
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return a + v * ab, 1.0 - v, v, 0.0
    cp = p - c
    d5 = dot3(ab, cp)
    d6 = dot3(ac, cp)
    if d6 >= 0.0 and d5 <= d6:
        return c.copy(), 0.0, 0.0, 1.0
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return a + w * ac, 1.0 - w, 0.0, w
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return b + w * (c - b), 0.0, 1.0 - w, w
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return a + ab * v + ac * w, 1.0 - v - w, v, w


@njit(**_JIT)
def closest_point_triangle_bary(p, a, b, c):
    """Allocation-free variant: (squared distance, u, v, w) of the closest point."""
    abx, aby, abz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    acx, acy, acz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    apx, apy, apz = p[0] - a[0], p[1] - a[1], p[2] - a[2]
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    u, v, w = 1.0, 0.0, 0.0
    done = False
    if d1 <= 0.0 and d2 <= 0.0:
        done = True
    if not done:
        bpx, bpy, bpz = p[0] - b[0], p[1] - b[1], p[2] - b[2]
        d3 = abx * bpx + aby * bpy + abz * bpz
        d4 = acx * bpx + acy * bpy + acz * bpz
        cpx, cpy, cpz = p[0] - c[0], p[1] - c[1], p[2] - c[2]
        d5 = abx * cpx + aby * cpy + abz * cpz
        d6 = acx * cpx + acy * cpy + acz * cpz
        vc = d1 * d4 - d3 * d2
        vb = d5 * d2 - d1 * d6
        va = d3 * d6 - d5 * d4
        if d3 >= 0.0 and d4 <= d3:
            u, v, w = 0.0, 1.0, 0.0
        elif vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
            t = d1 / (d1 - d3)
            u, v, w = 1.0 - t, t, 0.0
        elif d6 >= 0.0 and d5 <= d6:
            u, v, w = 0.0, 0.0, 1.0
        elif vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
            t = d2 / (d2 - d6)
            u, v, w = 1.0 - t, 0.0, t
        elif va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
            t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
            u, v, w = 0.0, 1.0 - t, t
        else:
            den = 1.0 / (va + vb + vc)
            v = vb * den
            w = vc * den
            u = 1.0 - v - w
    dx = u * a[0] + v * b[0] + w * c[0] - p[0]
    dy = u * a[1] + v * b[1] + w * c[1] - p[1]
    dz = u * a[2] + v * b[2] + w * c[2] - p[2]
    return dx * dx + dy * dy + dz * dz, u, v, w


@njit(**_JIT)
def closest_segment_segment(p1, q1, p2, q2):
    """Closest points between segments p1q1 and p2q2: (s, t, c1, c2)."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = dot3(d1, d1)
    e = dot3(d2, d2)
    f = dot3(d2, r)
    eps = 1e-300
    if a <= eps and e <= eps:
        return 0.0, 0.0, p1.copy(), p2.copy()
    if a <= eps:
        s = 0.0
        t = min(max(f / e, 0.0), 1.0)
    else:
        c = dot3(d1, r)
        if e <= eps:
            t = 0.0
            s = min(max(-c / a, 0.0), 1.0)
        else:
            b = dot3(d1, d2)
            denom = a * e - b * b
            if denom > 0.0:
                s = min(max((b * f - c * e) / denom, 0.0), 1.0)
            else:
                s = 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t = 1.0
                s = min(max((b - c) / a, 0.0), 1.0)
    return s, t, p1 + d1 * s, p2 + d2 * t


@njit(**_JIT)
def segment_triangle_hit(p, q, a, b, c):
    """Intersection of segment pq with triangle abc: (hit, u, v, w, s)."""
    d = q - p
    e1 = b - a
    e2 = c - a
    h = cross3(d, e2)
    det = dot3(e1, h)
    scale = math.sqrt(dot3(e1, e1) * dot3(e2, e2) * dot3(d, d))
    if abs(det) <= 1e-14 * scale:
        return False, 0.0, 0.0, 0.0, 0.0
    inv = 1.0 / det
    s_ = p - a
    v = dot3(s_, h) * inv
    if v < 0.0 or v > 1.0:
        return False, 0.0, 0.0, 0.0, 0.0
    qq = cross3(s_, e1)
    w = dot3(d, qq) * inv
    if w < 0.0 or v + w > 1.0:
        return False, 0.0, 0.0, 0.0, 0.0
    s = dot3(e2, qq) * inv
    if s < 0.0 or s > 1.0:
        return False, 0.0, 0.0, 0.0, 0.0
    return True, 1.0 - v - w, v, w, s


@njit(**_JIT)
def ray_triangle(o, d, a, b, c):
    """Moller-Trumbore ray/triangle test: (hit, t, u, v, w) with point o + t d."""
    e1 = b - a
    e2 = c - a
    h = cross3(d, e2)
    det = dot3(e1, h)
    scale = math.sqrt(dot3(e1, e1) * dot3(e2, e2) * dot3(d, d))
    if abs(det) <= 1e-14 * scale:
        return False, 0.0, 0.0, 0.0, 0.0
    inv = 1.0 / det
    s_ = o - a
    v = dot3(s_, h) * inv
    if v < 0.0 or v > 1.0:
        return False, 0.0, 0.0, 0.0, 0.0
    qq = cross3(s_, e1)
    w = dot3(d, qq) * inv
    if w < 0.0 or v + w > 1.0:
        return False, 0.0, 0.0, 0.0, 0.0
    t = dot3(e2, qq) * inv
    return True, t, 1.0 - v - w, v, w


@njit(**_JIT)
def triangle_triangle_closest(A, B):
    """Minimum distance between triangles ``A`` and ``B`` (3x3 vertex rows).

    Returns (distance, point_on_A, point_on_B, bary_A, bary_B).
    """
    ba = np.zeros(3)
    bb = np.zeros(3)
    # intersecting triangles: an edge of one pierces the other
    for side in range(2):
        P = A if side == 0 else B
        Q = B if side == 0 else A
        for i in range(3):
            j = (i + 1) % 3
            hit, u, v, w, s = segment_triangle_hit(P[i], P[j], Q[0], Q[1], Q[2])
            if hit:
                pt = P[i] + s * (P[j] - P[i])
                bp = np.zeros(3)
                bp[i] = 1.0 - s
                bp[j] = s
                bq = np.zeros(3)
                bq[0] = u
                bq[1] = v
                bq[2] = w
                if side == 0:
                    return 0.0, pt, pt.copy(), bp, bq
                return 0.0, pt.copy(), pt, bq, bp
    best = np.inf
    pa = np.zeros(3)
    pb = np.zeros(3)
    for i in range(3):
        dd, u, v, w = closest_point_triangle_bary(A[i], B[0], B[1], B[2])
        if dd < best:
            best = dd
            pa = A[i].copy()
            pb = u * B[0] + v * B[1] + w * B[2]
            ba[:] = 0.0
            ba[i] = 1.0
            bb[0] = u
            bb[1] = v
            bb[2] = w
    for i in range(3):
        dd, u, v, w = closest_point_triangle_bary(B[i], A[0], A[1], A[2])
        if dd < best:
            best = dd
            pa = u * A[0] + v * A[1] + w * A[2]
            pb = B[i].copy()
            ba[0] = u
            ba[1] = v
            ba[2] = w
            bb[:] = 0.0
            bb[i] = 1.0
    for i in range(3):
        i2 = (i + 1) % 3
        for j in range(3):
            j2 = (j + 1) % 3
            s, t, c1, c2 = closest_segment_segment(A[i], A[i2], B[j], B[j2])
            d = c1 - c2
            dd = dot3(d, d)
            if dd < best:
                best = dd
                pa = c1
                pb = c2
                ba[:] = 0.0
                ba[i] = 1.0 - s
                ba[i2] = s
                bb[:] = 0.0
                bb[j] = 1.0 - t
                bb[j2] = t
    return math.sqrt(best), pa, pb, ba, bb


@njit(**_JIT)
def solid_angle(q, a, b, c):
    """Signed solid angle of triangle abc seen from q (Van Oosterom-Strackee)."""
    ax, ay, az = a[0] - q[0], a[1] - q[1], a[2] - q[2]
    bx, by, bz = b[0] - q[0], b[1] - q[1], b[2] - q[2]
    cx, cy, cz = c[0] - q[0], c[1] - q[1], c[2] - q[2]
    la = math.sqrt(ax * ax + ay * ay + az * az)
    lb = math.sqrt(bx * bx + by * by + bz * bz)
    lc = math.sqrt(cx * cx + cy * cy + cz * cz)
    num = ax * (by * cz - bz * cy) + ay * (bz * cx - bx * cz) + az * (bx * cy - by * cx)
    den = (la * lb * lc + (ax * bx + ay * by + az * bz) * lc + (bx * cx + by * cy + bz * cz) * la
           + (cx * ax + cy * ay + cz * az) * lb)
    return 2.0 * math.atan2(num, den)


@njit(**_JIT)
def winding_numbers(queries, V, T):
    out = np.empty(queries.shape[0])
    inv4pi = 1.0 / (4.0 * math.pi)
    for qi in range(queries.shape[0]):
        q = queries[qi]
        acc = 0.0
        for t in range(T.shape[0]):
            acc += solid_angle(q, V[T[t, 0]], V[T[t, 1]], V[T[t, 2]])
        out[qi] = acc * inv4pi
    return out


@njit(**_JIT)
def box_triangle_overlap(center, half, a, b, c):
    """Separating-axis test between an axis-aligned box and a triangle."""
    v0 = a - center
    v1 = b - center
    v2 = c - center
    for k in range(3):
        lo = min(v0[k], min(v1[k], v2[k]))
        hi = max(v0[k], max(v1[k], v2[k]))
        if lo > half[k] or hi < -half[k]:
            return False
    e0 = v1 - v0
    e1 = v2 - v1
    e2 = v0 - v2
    n = cross3(e0, e1)
    r = half[0] * abs(n[0]) + half[1] * abs(n[1]) + half[2] * abs(n[2])
    if abs(dot3(n, v0)) > r:
        return False
    axis = np.zeros(3)
    for ei in range(3):
        e = e0 if ei == 0 else (e1 if ei == 1 else e2)
        for k in range(3):
            axis[:] = 0.0
            axis[k] = 1.0
            ax = cross3(axis, e)
            p0 = dot3(ax, v0)
            p1 = dot3(ax, v1)
            p2 = dot3(ax, v2)
            r = half[0] * abs(ax[0]) + half[1] * abs(ax[1]) + half[2] * abs(ax[2])
            if min(p0, min(p1, p2)) > r or max(p0, max(p1, p2)) < -r:
                return False
    return True
