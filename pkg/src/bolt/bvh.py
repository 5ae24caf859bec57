"""Axis-aligned bounding-box hierarchy over mesh triangles and its queries."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import (
    _JIT,
    box_triangle_overlap,
    closest_point_triangle_bary,
    cross3,
    dot3,
    ray_triangle,
    solid_angle,
    triangle_triangle_closest,
    winding_numbers,
)
from .mesh import TriMesh3

LEAF_SIZE = 4
REBUILD_FACTOR = 4.0
WINDING_BETA = 4.0


@njit(**_JIT)
def _triangle_bounds(V, T):
    m = T.shape[0]
    lo = np.empty((m, 3))
    hi = np.empty((m, 3))
    for t in range(m):
        for k in range(3):
            a = V[T[t, 0], k]
            b = V[T[t, 1], k]
            c = V[T[t, 2], k]
            lo[t, k] = min(a, min(b, c))
            hi[t, k] = max(a, max(b, c))
    return lo, hi


@njit(**_JIT)
def _build(tlo, thi, leaf_size):
    m = tlo.shape[0]
    cap = max(1, 2 * m)
    nlo = np.empty((cap, 3))
    nhi = np.empty((cap, 3))
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    start = np.zeros(cap, dtype=np.int64)
    count = np.zeros(cap, dtype=np.int64)
    prims = np.arange(m)
    cent = 0.5 * (tlo + thi)
    n_nodes = 1
    start[0] = 0
    count[0] = m
    stack = np.empty(cap, dtype=np.int64)
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        s = start[node]
        c = count[node]
        for k in range(3):
            nlo[node, k] = np.inf
            nhi[node, k] = -np.inf
        clo = np.full(3, np.inf)
        chi = np.full(3, -np.inf)
        for i in range(s, s + c):
            p = prims[i]
            for k in range(3):
                nlo[node, k] = min(nlo[node, k], tlo[p, k])
                nhi[node, k] = max(nhi[node, k], thi[p, k])
                clo[k] = min(clo[k], cent[p, k])
                chi[k] = max(chi[k], cent[p, k])
        if c <= leaf_size:
            continue
        ext = chi - clo
        axis = 0
        if ext[1] > ext[axis]:
            axis = 1
        if ext[2] > ext[axis]:
            axis = 2
        seg = prims[s : s + c].copy()
        order = np.argsort(cent[seg, axis], kind="mergesort")
        prims[s : s + c] = seg[order]
        half = c // 2
        l = n_nodes
        r = n_nodes + 1
        n_nodes += 2
        left[node] = l
        right[node] = r
        start[l] = s
        count[l] = half
        start[r] = s + half
        count[r] = c - half
        stack[sp] = r
        sp += 1
        stack[sp] = l
        sp += 1
    return nlo[:n_nodes].copy(), nhi[:n_nodes].copy(), left[:n_nodes].copy(), right[:n_nodes].copy(), start[:n_nodes].copy(), count[:n_nodes].copy(), prims


@njit(**_JIT)
def _refit(tlo, thi, nlo, nhi, left, right, start, count, prims):
    nlo2 = np.empty_like(nlo)
    nhi2 = np.empty_like(nhi)
    for node in range(nlo.shape[0] - 1, -1, -1):
        if left[node] < 0:
            for k in range(3):
                nlo2[node, k] = np.inf
                nhi2[node, k] = -np.inf
            for i in range(start[node], start[node] + count[node]):
                p = prims[i]
                for k in range(3):
                    nlo2[node, k] = min(nlo2[node, k], tlo[p, k])
                    nhi2[node, k] = max(nhi2[node, k], thi[p, k])
        else:
            l = left[node]
            r = right[node]
            for k in range(3):
                nlo2[node, k] = min(nlo2[l, k], nlo2[r, k])
                nhi2[node, k] = max(nhi2[l, k], nhi2[r, k])
    return nlo2, nhi2


@njit(**_JIT)
def _box_dist2(p, lo, hi):
    d = 0.0
    for k in range(3):
        if p[k] < lo[k]:
            d += (lo[k] - p[k]) ** 2
        elif p[k] > hi[k]:
            d += (p[k] - hi[k]) ** 2
    return d


@njit(**_JIT)
def _closest_points(Q, V, T, nlo, nhi, left, right, start, count, prims):
    nq = Q.shape[0]
    out_p = np.empty((nq, 3))
    out_t = np.full(nq, -1, dtype=np.int64)
    out_b = np.zeros((nq, 3))
    out_d = np.full(nq, np.inf)
    stack = np.empty(128, dtype=np.int64)
    for qi in range(nq):
        q = Q[qi]
        best = np.inf
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if _box_dist2(q, nlo[node], nhi[node]) > best:
                continue
            if left[node] < 0:
                for i in range(start[node], start[node] + count[node]):
                    t = prims[i]
                    a = V[T[t, 0]]
                    b = V[T[t, 1]]
                    c = V[T[t, 2]]
                    dd, u, v, w = closest_point_triangle_bary(q, a, b, c)
                    if dd < best or (dd == best and t < out_t[qi]):
                        best = dd
                        for k in range(3):
                            out_p[qi, k] = u * a[k] + v * b[k] + w * c[k]
                        out_t[qi] = t
                        out_b[qi, 0] = u
                        out_b[qi, 1] = v
                        out_b[qi, 2] = w
            else:
                l = left[node]
                r = right[node]
                dl = _box_dist2(q, nlo[l], nhi[l])
                dr = _box_dist2(q, nlo[r], nhi[r])
                if dl <= dr:
                    stack[sp] = r
                    stack[sp + 1] = l
                else:
                    stack[sp] = l
                    stack[sp + 1] = r
                sp += 2
        out_d[qi] = math.sqrt(best)
    return out_p, out_t, out_b, out_d


@njit(**_JIT)
def _boxes_overlap(alo, ahi, blo, bhi, pad):
    for k in range(3):
        if alo[k] - pad > bhi[k] or blo[k] - pad > ahi[k]:
            return False
    return True


@njit(**_JIT)
def _cells_touch_mesh(centers, half, V, T, nlo, nhi, left, right, start, count, prims):
    n = centers.shape[0]
    out = np.zeros(n, dtype=np.bool_)
    stack = np.empty(128, dtype=np.int64)
    for ci in range(n):
        lo = centers[ci] - half
        hi = centers[ci] + half
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0 and not out[ci]:
            sp -= 1
            node = stack[sp]
            if not _boxes_overlap(lo, hi, nlo[node], nhi[node], 0.0):
                continue
            if left[node] < 0:
                for i in range(start[node], start[node] + count[node]):
                    t = prims[i]
                    if box_triangle_overlap(centers[ci], half, V[T[t, 0]], V[T[t, 1]], V[T[t, 2]]):
                        out[ci] = True
                        break
            else:
                stack[sp] = left[node]
                stack[sp + 1] = right[node]
                sp += 2
    return out


@njit(**_JIT)
def _pairs(Va, Ta, alo, ahi, al, ar, ast, acn, apr,
           Vb, Tb, blo, bhi, bl, br, bst, bcn, bpr, radius, self_mode, skip_adjacent):
    cap = 1024
    ta = np.empty(cap, dtype=np.int64)
    tb = np.empty(cap, dtype=np.int64)
    dist = np.empty(cap)
    pa = np.empty((cap, 3))
    pb = np.empty((cap, 3))
    ba = np.empty((cap, 3))
    bb = np.empty((cap, 3))
    n = 0
    stack = np.empty((256, 2), dtype=np.int64)
    sp = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    sp = 1
    A = np.empty((3, 3))
    B = np.empty((3, 3))
    while sp > 0:
        sp -= 1
        na = stack[sp, 0]
        nb = stack[sp, 1]
        if not _boxes_overlap(alo[na], ahi[na], blo[nb], bhi[nb], radius):
            continue
        leaf_a = al[na] < 0
        leaf_b = bl[nb] < 0
        if leaf_a and leaf_b:
            for i in range(ast[na], ast[na] + acn[na]):
                t1 = apr[i]
                for k in range(3):
                    A[k] = Va[Ta[t1, k]]
                for j in range(bst[nb], bst[nb] + bcn[nb]):
                    t2 = bpr[j]
                    if self_mode and t2 <= t1:
                        continue
                    if skip_adjacent:
                        shared = False
                        for u in range(3):
                            for v in range(3):
                                if Ta[t1, u] == Tb[t2, v]:
                                    shared = True
                        if shared:
                            continue
                    far = False
                    for k in range(3):
                        B[k] = Vb[Tb[t2, k]]
                    for k in range(3):
                        amin = min(A[0, k], A[1, k], A[2, k])
                        amax = max(A[0, k], A[1, k], A[2, k])
                        bmin = min(B[0, k], B[1, k], B[2, k])
                        bmax = max(B[0, k], B[1, k], B[2, k])
                        if amin - radius > bmax or bmin - radius > amax:
                            far = True
                    if far:
                        continue
                    d, p1, p2, b1, b2 = triangle_triangle_closest(A, B)
                    if d <= radius:
                        if n == cap:
                            cap *= 2
                            ta = np.concatenate((ta, np.empty(n, dtype=np.int64)))
                            tb = np.concatenate((tb, np.empty(n, dtype=np.int64)))
                            dist = np.concatenate((dist, np.empty(n)))
                            pa = np.concatenate((pa, np.empty((n, 3))))
                            pb = np.concatenate((pb, np.empty((n, 3))))
                            ba = np.concatenate((ba, np.empty((n, 3))))
                            bb = np.concatenate((bb, np.empty((n, 3))))
                        ta[n] = t1
                        tb[n] = t2
                        dist[n] = d
                        pa[n] = p1
                        pb[n] = p2
                        ba[n] = b1
                        bb[n] = b2
                        n += 1
        else:
            if sp + 4 > stack.shape[0]:
                stack = np.concatenate((stack, np.empty_like(stack)))
            split_a = (not leaf_a) and (leaf_b or (ahi[na] - alo[na]).sum() >= (bhi[nb] - blo[nb]).sum())
            if split_a:
                stack[sp, 0] = ar[na]
                stack[sp, 1] = nb
                stack[sp + 1, 0] = al[na]
                stack[sp + 1, 1] = nb
            else:
                stack[sp, 0] = na
                stack[sp, 1] = br[nb]
                stack[sp + 1, 0] = na
                stack[sp + 1, 1] = bl[nb]
            sp += 2
    return ta[:n], tb[:n], dist[:n], pa[:n], pb[:n], ba[:n], bb[:n]


@njit(**_JIT)
def _raycast(O, D, tmin, tmax, front_only, V, T, nlo, nhi, left, right, start, count, prims):
    nq = O.shape[0]
    out_t = np.full(nq, np.inf)
    out_tri = np.full(nq, -1, dtype=np.int64)
    out_b = np.zeros((nq, 3))
    stack = np.empty(128, dtype=np.int64)
    for qi in range(nq):
        o = O[qi]
        d = D[qi]
        best = tmax
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            # slab test
            t0 = tmin
            t1 = best
            hit_box = True
            for k in range(3):
                if abs(d[k]) < 1e-300:
                    if o[k] < nlo[node, k] or o[k] > nhi[node, k]:
                        hit_box = False
                        break
                else:
                    inv = 1.0 / d[k]
                    ta = (nlo[node, k] - o[k]) * inv
                    tb = (nhi[node, k] - o[k]) * inv
                    if ta > tb:
                        ta, tb = tb, ta
                    t0 = max(t0, ta)
                    t1 = min(t1, tb)
                    if t0 > t1:
                        hit_box = False
                        break
            if not hit_box:
                continue
            if left[node] < 0:
                for i in range(start[node], start[node] + count[node]):
                    t = prims[i]
                    a = V[T[t, 0]]
                    b = V[T[t, 1]]
                    c = V[T[t, 2]]
                    if front_only:
                        e1 = b - a
                        e2 = c - a
                        nx = e1[1] * e2[2] - e1[2] * e2[1]
                        ny = e1[2] * e2[0] - e1[0] * e2[2]
                        nz = e1[0] * e2[1] - e1[1] * e2[0]
                        if nx * d[0] + ny * d[1] + nz * d[2] >= 0.0:
                            continue
                    hit, th, u, v, w = ray_triangle(o, d, a, b, c)
                    if hit and th >= tmin and (th < best or (th == best and t < out_tri[qi])):
                        best = th
                        out_t[qi] = th
                        out_tri[qi] = t
                        out_b[qi, 0] = u
                        out_b[qi, 1] = v
                        out_b[qi, 2] = w
            else:
                stack[sp] = right[node]
                stack[sp + 1] = left[node]
                sp += 2
    return out_t, out_tri, out_b


@njit(**_JIT)
def _dipoles(V, T, left, right, start, count, prims, nlo, nhi):
    """Per node: total area vector, area-weighted centroid and bounding radius about it."""
    n = left.shape[0]
    N = np.zeros((n, 3))
    P = np.zeros((n, 3))
    A = np.zeros(n)
    R = np.zeros(n)
    for node in range(n - 1, -1, -1):
        if left[node] < 0:
            for i in range(start[node], start[node] + count[node]):
                t = prims[i]
                a = V[T[t, 0]]
                b = V[T[t, 1]]
                c = V[T[t, 2]]
                nv = 0.5 * cross3(b - a, c - a)
                ar = math.sqrt(dot3(nv, nv))
                N[node] += nv
                P[node] += ar * (a + b + c) / 3.0
                A[node] += ar
        else:
            for ch in (left[node], right[node]):
                N[node] += N[ch]
                P[node] += A[ch] * P[ch]
                A[node] += A[ch]
        if A[node] > 0:
            P[node] /= A[node]
        else:
            P[node] = 0.5 * (nlo[node] + nhi[node])
        r2 = 0.0
        for corner in range(8):
            d2 = 0.0
            for k in range(3):
                x = nhi[node, k] if (corner >> k) & 1 else nlo[node, k]
                d2 += (x - P[node, k]) ** 2
            r2 = max(r2, d2)
        R[node] = math.sqrt(r2)
    return N, P, R


@njit(**_JIT)
def _fast_winding(Q, V, T, left, right, start, count, prims, N, P, R, beta):
    out = np.empty(Q.shape[0])
    stack = np.empty(128, dtype=np.int64)
    inv4pi = 1.0 / (4.0 * math.pi)
    for qi in range(Q.shape[0]):
        q = Q[qi]
        acc = 0.0
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            dx = P[node, 0] - q[0]
            dy = P[node, 1] - q[1]
            dz = P[node, 2] - q[2]
            dist = math.sqrt(dx * dx + dy * dy + dz * dz)
            if dist > beta * R[node]:
                acc += (dx * N[node, 0] + dy * N[node, 1] + dz * N[node, 2]) / (dist * dist * dist)
            elif left[node] < 0:
                for i in range(start[node], start[node] + count[node]):
                    t = prims[i]
                    acc += solid_angle(q, V[T[t, 0]], V[T[t, 1]], V[T[t, 2]])
            else:
                stack[sp] = left[node]
                stack[sp + 1] = right[node]
                sp += 2
        out[qi] = acc * inv4pi
    return out


def _box_area(lo, hi):
    e = np.maximum(hi - lo, 0.0)
    return 2.0 * (e[..., 0] * e[..., 1] + e[..., 1] * e[..., 2] + e[..., 2] * e[..., 0])


@dataclass(frozen=True, eq=False)
class TriangleBVH:
    """Median-split AABB tree; leaves hold at most ``LEAF_SIZE`` triangles.

    Instances are immutable: :meth:`refit` returns a new tree sharing topology.
    """

    node_lo: np.ndarray
    node_hi: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    prims: np.ndarray
    build_cost: float

    @classmethod
    def build(cls, mesh: TriMesh3, leaf_size=LEAF_SIZE):
        V = np.ascontiguousarray(mesh.positions)
        T = np.ascontiguousarray(mesh.triangles)
        if len(T) == 0:
            raise ValueError("cannot build a BVH over an empty mesh")
        tlo, thi = _triangle_bounds(V, T)
        nlo, nhi, l, r, s, c, p = _build(tlo, thi, leaf_size)
        tmp = cls(nlo, nhi, l, r, s, c, p, 0.0)
        return cls(nlo, nhi, l, r, s, c, p, tmp.sah_cost())

    def sah_cost(self):
        root = _box_area(self.node_lo[0], self.node_hi[0])
        if root <= 0:
            return float(self.count[0])
        areas = _box_area(self.node_lo, self.node_hi)
        leaf = self.left < 0
        cost = np.where(leaf, areas * self.count, areas).sum()
        return float(cost / root)

    def refit(self, positions, triangles):
        tlo, thi = _triangle_bounds(np.ascontiguousarray(positions), np.ascontiguousarray(triangles))
        nlo, nhi = _refit(tlo, thi, self.node_lo, self.node_hi, self.left, self.right,
                          self.start, self.count, self.prims)
        return TriangleBVH(nlo, nhi, self.left, self.right, self.start, self.count,
                           self.prims, self.build_cost)

    def updated(self, mesh: TriMesh3):
        """Refit to ``mesh``; rebuild when the SAH cost degrades past 4x the build cost."""
        fitted = self.refit(mesh.positions, mesh.triangles)
        if fitted.sah_cost() > REBUILD_FACTOR * max(self.build_cost, 1e-12):
            return TriangleBVH.build(mesh)
        return fitted

    def leaf_sets(self):
        leaves = np.flatnonzero(self.left < 0)
        return [self.prims[self.start[n]: self.start[n] + self.count[n]] for n in leaves]

    def dipoles(self, mesh: TriMesh3):
        return _dipoles(mesh.positions, mesh.triangles, self.left, self.right, self.start,
                        self.count, self.prims, self.node_lo, self.node_hi)

    @property
    def _arrays(self):
        return (self.node_lo, self.node_hi, self.left, self.right, self.start, self.count, self.prims)


def closest_points(queries, mesh: TriMesh3, bvh: TriangleBVH | None = None):
    """Batch nearest-surface query: (points, triangle ids, barycentrics, distances)."""
    bvh = bvh or TriangleBVH.build(mesh)
    Q = np.ascontiguousarray(np.atleast_2d(queries), dtype=np.float64)
    return _closest_points(Q, mesh.positions, mesh.triangles, *bvh._arrays)


def winding_number(query, mesh: TriMesh3, bvh: TriangleBVH | None = None, beta=WINDING_BETA):
    """Generalized winding number; clusters farther than ``beta`` radii use their dipole term.

    ``beta=None`` sums every triangle exactly.
    """
    Q = np.ascontiguousarray(np.atleast_2d(query), dtype=np.float64)
    if beta is None:
        w = winding_numbers(Q, mesh.positions, mesh.triangles)
    else:
        bvh = bvh or TriangleBVH.build(mesh)
        w = _fast_winding(Q, mesh.positions, mesh.triangles, bvh.left, bvh.right, bvh.start,
                          bvh.count, bvh.prims, *bvh.dipoles(mesh), float(beta))
    return w if np.ndim(query) > 1 else float(w[0])


def closest_point_on_mesh(query, mesh: TriMesh3, bvh: TriangleBVH | None = None, threshold=0.5):
    """Nearest surface point to a single query, with inside/outside classification.

    Returns ``(point, triangle_index, barycentric, side)`` where ``side`` is
    ``"inside"`` when the generalized winding number exceeds ``threshold``.
    """
    p, t, b, _ = closest_points(np.asarray(query, float).reshape(1, 3), mesh, bvh)
    w = winding_number(np.asarray(query, float), mesh, bvh)
    return p[0], int(t[0]), b[0], ("inside" if w > threshold else "outside")


def cells_touching_mesh(centers, half_size, mesh: TriMesh3, bvh: TriangleBVH | None = None):
    bvh = bvh or TriangleBVH.build(mesh)
    C = np.ascontiguousarray(np.atleast_2d(centers), dtype=np.float64)
    half = np.full(3, float(half_size))
    return _cells_touch_mesh(C, half, mesh.positions, mesh.triangles, *bvh._arrays)


@dataclass(frozen=True)
class ProximityPairs:
    tri_a: np.ndarray
    tri_b: np.ndarray
    distance: np.ndarray
    point_a: np.ndarray
    point_b: np.ndarray
    bary_a: np.ndarray
    bary_b: np.ndarray

    def __len__(self):
        return len(self.tri_a)

    def as_set(self):
        return set(zip(self.tri_a.tolist(), self.tri_b.tolist()))


def proximity_pairs(bvh_a, mesh_a, bvh_b, mesh_b, radius, skip_adjacent=False) -> ProximityPairs:
    """All triangle pairs within ``radius`` of each other, with closest points.

    When ``mesh_a is mesh_b`` each unordered pair is reported once with
    ``tri_a < tri_b``. ``skip_adjacent`` drops pairs that share a vertex
    index. Results are sorted by (tri_a, tri_b).
    """
    if radius <= 0:
        raise ValueError("radius must be > 0")
    self_mode = mesh_a is mesh_b
    out = _pairs(mesh_a.positions, mesh_a.triangles, *bvh_a._arrays,
                 mesh_b.positions, mesh_b.triangles, *bvh_b._arrays, float(radius), self_mode,
                 bool(skip_adjacent))
    order = np.lexsort((out[1], out[0]))
    return ProximityPairs(*(a[order] for a in out))


def raycast(origins, directions, mesh: TriMesh3, bvh: TriangleBVH | None = None,
            tmin=0.0, tmax=np.inf, front_only=False):
    """Nearest hit along each ray with ``tmin <= t <= tmax``: (t, triangle, bary).

    ``front_only`` ignores triangles whose normal does not oppose the ray.
    Misses report ``t = inf`` and triangle ``-1``.
    """
    bvh = bvh or TriangleBVH.build(mesh)
    O = np.ascontiguousarray(np.atleast_2d(origins), dtype=np.float64)
    D = np.ascontiguousarray(np.atleast_2d(directions), dtype=np.float64)
    return _raycast(O, D, float(tmin), float(tmax), bool(front_only), mesh.positions,
                    mesh.triangles, *bvh._arrays)
