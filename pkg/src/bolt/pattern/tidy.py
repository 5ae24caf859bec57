from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve


def cotan_laplacian(positions2d, triangles):
    """Symmetric cotangent stiffness matrix (positive semidefinite) of a 2D mesh."""
    P = np.asarray(positions2d, float)
    T = np.asarray(triangles)
    n = len(P)
    rows, cols, vals = [], [], []
    for k in range(3):
        i, j, o = T[:, (k + 1) % 3], T[:, (k + 2) % 3], T[:, k]
        u = P[i] - P[o]
        v = P[j] - P[o]
        cross = np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
        cot = np.sum(u * v, axis=1) / np.maximum(cross, 1e-300)
        w = 0.5 * cot
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [-w, -w, w, w]
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n)).tocsr()


def dirichlet_energy(x, Lc):
    return 0.5 * float(np.sum(x * (Lc @ x)))


def dirichlet_tidy(x, pinned, rest_positions, triangles):
    """Harmonic interior under the rest-layout cotangent Laplacian, pinned vertices fixed.

    Vertices that share no triangle with a free vertex keep their values.
    """
    x = np.array(x, dtype=float)
    n = len(x)
    pin = np.zeros(n, dtype=bool)
    pin[np.asarray(pinned, dtype=np.int64)] = True
    free = np.flatnonzero(~pin)
    if free.size == 0:
        return x
    Lc = cotan_laplacian(rest_positions, triangles)
    fixed = np.flatnonzero(pin)
    L_ff = Lc[free][:, free].tocsc()
    L_fp = Lc[free][:, fixed]
    rhs = -(L_fp @ x[fixed])
    sol = spsolve(L_ff, rhs)
    x[free] = sol.reshape(len(free), -1)
    return x
