"""Elastic energies of the cloth and their exact gradients.

Stretch acts on the warp/weft deformation gradient of each triangle. Bending
penalizes a per-triangle shape operator built from mid-edge normals and
expressed in warp/weft coordinates. Seam bending is a dihedral spring across
sewn triangle pairs.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ..geometry import _JIT, cross3, dot3


@njit(**_JIT)
def stretch_energy_grad(X, T, Minv, area, k):
    """Total stretch energy and its gradient (N, 3).

    ``k[t] = (k_warp, k_weft, k_shear)``; per triangle
    ``A (k_w/2 (|f0| - 1)^2 + k_f/2 (|f1| - 1)^2 + k_s/2 (f0 . f1)^2)``.
    """
    grad = np.zeros_like(X)
    E = 0.0
    for t in range(T.shape[0]):
        i0, i1, i2 = T[t, 0], T[t, 1], T[t, 2]
        e1 = X[i1] - X[i0]
        e2 = X[i2] - X[i0]
        f0 = e1 * Minv[t, 0, 0] + e2 * Minv[t, 1, 0]
        f1 = e1 * Minv[t, 0, 1] + e2 * Minv[t, 1, 1]
        l0 = math.sqrt(dot3(f0, f0))
        l1 = math.sqrt(dot3(f1, f1))
        sh = dot3(f0, f1)
        A = area[t]
        E += A * (0.5 * k[t, 0] * (l0 - 1.0) ** 2 + 0.5 * k[t, 1] * (l1 - 1.0) ** 2
                  + 0.5 * k[t, 2] * sh * sh)
        g0 = A * (k[t, 0] * (l0 - 1.0) / max(l0, 1e-30) * f0 + k[t, 2] * sh * f1)
        g1 = A * (k[t, 1] * (l1 - 1.0) / max(l1, 1e-30) * f1 + k[t, 2] * sh * f0)
        ge1 = g0 * Minv[t, 0, 0] + g1 * Minv[t, 0, 1]
        ge2 = g0 * Minv[t, 1, 0] + g1 * Minv[t, 1, 1]
        grad[i1] += ge1
        grad[i2] += ge2
        grad[i0] -= ge1 + ge2
    return E, grad


@njit(**_JIT)
def _face_normals(X, T):
    m = T.shape[0]
    C = np.empty((m, 3))
    N = np.empty((m, 3))
    L = np.empty(m)
    for t in range(m):
        c = cross3(X[T[t, 1]] - X[T[t, 0]], X[T[t, 2]] - X[T[t, 0]])
        l = math.sqrt(dot3(c, c))
        C[t] = c
        L[t] = l
        N[t] = c / max(l, 1e-300)
    return C, N, L


@njit(**_JIT)
def _mid_normals(N, adj, t):
    """Unit mid-edge normals of triangle t (row i for the edge opposite vertex i) and raw sums."""
    M = np.empty((3, 3))
    R = np.empty((3, 3))
    for i in range(3):
        a = adj[t, i]
        if a >= 0:
            s = N[t] + N[a]
        else:
            s = 2.0 * N[t]
        R[i] = s
        M[i] = s / max(math.sqrt(dot3(s, s)), 1e-300)
    return M, R


@njit(**_JIT)
def shape_operators(X, T, Minv, Dinv, adj):
    """Per triangle ``S = sym(F^T G)`` as (T, 3) rows ``(S00, S11, S10)``."""
    _, N, _ = _face_normals(X, T)
    out = np.empty((T.shape[0], 3))
    for t in range(T.shape[0]):
        M, _ = _mid_normals(N, adj, t)
        e1 = X[T[t, 1]] - X[T[t, 0]]
        e2 = X[T[t, 2]] - X[T[t, 0]]
        F0 = e1 * Minv[t, 0, 0] + e2 * Minv[t, 1, 0]
        F1 = e1 * Minv[t, 0, 1] + e2 * Minv[t, 1, 1]
        w1 = M[1] - M[0]
        w2 = M[2] - M[0]
        G0 = w1 * Dinv[t, 0, 0] + w2 * Dinv[t, 1, 0]
        G1 = w1 * Dinv[t, 0, 1] + w2 * Dinv[t, 1, 1]
        out[t, 0] = dot3(F0, G0)
        out[t, 1] = dot3(F1, G1)
        out[t, 2] = 0.5 * (dot3(F1, G0) + dot3(F0, G1))
    return out


@njit(**_JIT)
def bend_energy_grad(X, T, Minv, Dinv, adj, area, kb, rest):
    """Shape-operator bending energy ``A/2 (k_w dS00^2 + k_f dS11^2 + k_s dS10^2)`` and gradient."""
    C, N, L = _face_normals(X, T)
    m = T.shape[0]
    grad = np.zeros_like(X)
    gN = np.zeros((m, 3))
    E = 0.0
    for t in range(m):
        M, R = _mid_normals(N, adj, t)
        i0, i1, i2 = T[t, 0], T[t, 1], T[t, 2]
        e1 = X[i1] - X[i0]
        e2 = X[i2] - X[i0]
        F0 = e1 * Minv[t, 0, 0] + e2 * Minv[t, 1, 0]
        F1 = e1 * Minv[t, 0, 1] + e2 * Minv[t, 1, 1]
        w1 = M[1] - M[0]
        w2 = M[2] - M[0]
        G0 = w1 * Dinv[t, 0, 0] + w2 * Dinv[t, 1, 0]
        G1 = w1 * Dinv[t, 0, 1] + w2 * Dinv[t, 1, 1]
        d00 = dot3(F0, G0) - rest[t, 0]
        d11 = dot3(F1, G1) - rest[t, 1]
        d10 = 0.5 * (dot3(F1, G0) + dot3(F0, G1)) - rest[t, 2]
        A = area[t]
        E += 0.5 * A * (kb[t, 0] * d00 * d00 + kb[t, 1] * d11 * d11 + kb[t, 2] * d10 * d10)
        # P = dE/dX for X = F^T G (X_ij = F_i . G_j)
        p00 = A * kb[t, 0] * d00
        p11 = A * kb[t, 1] * d11
        p01 = 0.5 * A * kb[t, 2] * d10
        p10 = p01
        # dE/dF_i = sum_j P_ij G_j ; dE/dG_j = sum_i P_ij F_i
        gF0 = p00 * G0 + p01 * G1
        gF1 = p10 * G0 + p11 * G1
        gG0 = p00 * F0 + p10 * F1
        gG1 = p01 * F0 + p11 * F1
        ge1 = gF0 * Minv[t, 0, 0] + gF1 * Minv[t, 0, 1]
        ge2 = gF0 * Minv[t, 1, 0] + gF1 * Minv[t, 1, 1]
        grad[i1] += ge1
        grad[i2] += ge2
        grad[i0] -= ge1 + ge2
        gw1 = gG0 * Dinv[t, 0, 0] + gG1 * Dinv[t, 0, 1]
        gw2 = gG0 * Dinv[t, 1, 0] + gG1 * Dinv[t, 1, 1]
        gm = np.empty((3, 3))
        gm[0] = -gw1 - gw2
        gm[1] = gw1
        gm[2] = gw2
        for i in range(3):
            s = R[i]
            ls = max(math.sqrt(dot3(s, s)), 1e-300)
            mi = M[i]
            gs = (gm[i] - dot3(mi, gm[i]) * mi) / ls
            a = adj[t, i]
            if a >= 0:
                gN[t] += gs
                gN[a] += gs
            else:
                gN[t] += 2.0 * gs
    for f in range(m):
        n = N[f]
        gc = (gN[f] - dot3(n, gN[f]) * n) / max(L[f], 1e-300)
        i0, i1, i2 = T[f, 0], T[f, 1], T[f, 2]
        e1 = X[i1] - X[i0]
        e2 = X[i2] - X[i0]
        g1 = cross3(e2, gc)
        g2 = cross3(gc, e1)
        grad[i1] += g1
        grad[i2] += g2
        grad[i0] -= g1 + g2
    return E, grad


@njit(**_JIT)
def hinge_angle_grad(xa, xb, xc1, xc2):
    """Signed dihedral angle of triangles (a, b, c1) and (b, a, c2) and its gradient.

    ``theta = atan2((n1 x n2) . e_hat, n1 . n2)``; returns
    ``(theta, d/da, d/db, d/dc1, d/dc2)``.
    """
    e = xb - xa
    le = math.sqrt(dot3(e, e))
    N1 = cross3(e, xc1 - xa)
    N2 = cross3(xa - xb, xc2 - xb)
    l1 = dot3(N1, N1)
    l2 = dot3(N2, N2)
    n1 = N1 / math.sqrt(l1)
    n2 = N2 / math.sqrt(l2)
    theta = math.atan2(dot3(cross3(n1, n2), e) / le, dot3(n1, n2))
    g1 = -le / l1 * N1
    g2 = -le / l2 * N2
    s1 = dot3(xc1 - xa, e) / (le * le)
    s2 = dot3(xc2 - xa, e) / (le * le)
    ga = -(1.0 - s1) * g1 - (1.0 - s2) * g2
    gb = -s1 * g1 - s2 * g2
    return theta, ga, gb, g1, g2


@njit(**_JIT)
def seam_bend_forces(X, V, H, theta0, coef, k, kd, F):
    """Accumulate dihedral spring and damping forces into F; returns elastic energy.

    ``H[h] = (a, b, c1, c2, a2, b2)``: edge (a, b) of the first triangle, wings
    c1, c2, and the sewn copies (a2, b2) of the edge in the second triangle.
    Edge-vertex forces are split evenly between the two copies.
    """
    E = 0.0
    for h in range(H.shape[0]):
        a, b, c1, c2, a2, b2 = H[h, 0], H[h, 1], H[h, 2], H[h, 3], H[h, 4], H[h, 5]
        th, ga, gb, g1, g2 = hinge_angle_grad(X[a], X[b], X[c1], X[c2])
        d = th - theta0[h]
        d = (d + math.pi) % (2.0 * math.pi) - math.pi
        rate = dot3(ga, V[a]) + dot3(gb, V[b]) + dot3(g1, V[c1]) + dot3(g2, V[c2])
        E += 0.5 * k[h] * coef[h] * d * d
        s = -coef[h] * (k[h] * d + kd[h] * rate)
        F[a] += 0.5 * s * ga
        F[a2] += 0.5 * s * ga
        F[b] += 0.5 * s * gb
        F[b2] += 0.5 * s * gb
        F[c1] += s * g1
        F[c2] += s * g2
    return E


def seam_hinge_energy(X, H, theta0, coef, k):
    """Elastic seam-bend energy evaluated directly (for checks and telemetry)."""
    E = 0.0
    for h in range(len(H)):
        a, b, c1, c2 = H[h, :4]
        th = hinge_angle_grad(X[a], X[b], X[c1], X[c2])[0]
        d = (th - theta0[h] + np.pi) % (2 * np.pi) - np.pi
        E += 0.5 * k[h] * coef[h] * d * d
    return E
