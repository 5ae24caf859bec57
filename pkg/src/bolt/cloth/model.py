"""Static rest data of one or more garments simulated together."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..mesh import boundary_edges
from .forces import hinge_angle_grad, shape_operators


def _cross2(u, v):
    return u[0] * v[1] - u[1] * v[0]


def face_adjacency(T):
    """``adj[t, i]``: triangle across the edge opposite vertex i, or -1."""
    adj = -np.ones((len(T), 3), dtype=np.int64)
    owner = {}
    for t in range(len(T)):
        for i in range(3):
            a, b = T[t, (i + 1) % 3], T[t, (i + 2) % 3]
            key = (min(a, b), max(a, b))
            if key in owner:
                s, j = owner.pop(key)
                adj[t, i] = s
                adj[s, j] = t
            else:
                owner[key] = (t, i)
    return adj


def seam_hinges(T, seam_gid):
    """Triangle pairs sewn along a boundary edge.

    Returns rows ``(a, b, c1, c2, a2, b2)``: (a, b) follows the first
    triangle's winding, c1/c2 are the wing vertices and (a2, b2) the sewn
    copies of a and b in the second triangle.
    """
    if not np.any(seam_gid >= 0):
        return np.zeros((0, 6), dtype=np.int64)
    tri_of = {}
    for t in range(len(T)):
        for i in range(3):
            tri_of[(int(T[t, i]), int(T[t, (i + 1) % 3]))] = (t, int(T[t, (i + 2) % 3]))
    by_groups = {}
    for a, b in boundary_edges(T):
        ga, gb = seam_gid[a], seam_gid[b]
        if ga < 0 or gb < 0 or ga == gb:
            continue
        key = (min(ga, gb), max(ga, gb))
        by_groups.setdefault(key, []).append((int(a), int(b)))
    rows = []
    for key in sorted(by_groups):
        edges = sorted(by_groups[key])
        for k in range(len(edges) - 1):
            a, b = edges[k]
            a2, b2 = edges[k + 1]
            if seam_gid[a2] != seam_gid[a]:
                a2, b2 = b2, a2
            _, c1 = tri_of[(a, b)]
            e2 = (b2, a2) if (b2, a2) in tri_of else (a2, b2)
            _, c2 = tri_of[e2]
            rows.append((a, b, c1, c2, a2, b2))
    return np.array(rows, dtype=np.int64).reshape(-1, 6)


@dataclass(frozen=True, eq=False)
class ClothModel:
    """Topology, rest geometry and per-element stiffness of the simulated cloth."""

    triangles: np.ndarray
    layout2d: np.ndarray
    Minv: np.ndarray
    Dinv: np.ndarray
    adj: np.ndarray
    area: np.ndarray
    k_stretch: np.ndarray
    k_bend: np.ndarray
    rest_curvature: np.ndarray
    mass: np.ndarray
    thickness: float
    seam_members: np.ndarray
    seam_gid: np.ndarray
    seam_offsets: np.ndarray
    vertex_group: np.ndarray
    hinges: np.ndarray
    hinge_rest: np.ndarray
    hinge_coef: np.ndarray
    hinge_k: np.ndarray
    hinge_kd: np.ndarray
    garment_slices: tuple

    @property
    def n_vertices(self):
        return len(self.mass)

    @classmethod
    def from_garments(cls, garments, rest_curvature="flat"):
        """Concatenate garments into one model.

        ``rest_curvature`` is ``"flat"`` (zero) or ``"initial"`` (the shape
        operators of the current 3D positions).
        """
        if not isinstance(garments, (list, tuple)):
            garments = [garments]
        tris, lay, pos, kst, kbd, dens, members, gids, offs, slices = [], [], [], [], [], [], [], [], [], []
        base = 0
        gbase = 0
        thickness = 0.0
        hinge_k, hinge_kd = [], []
        for g in garments:
            n = g.n_vertices
            mat = g.material
            T = g.mesh3d.triangles + base
            tris.append(T)
            lay.append(g.layout2d.positions2d)
            pos.append(g.mesh3d.positions)
            kst.append(np.tile([mat.k_warp, mat.k_weft, mat.k_shear_stretch], (len(T), 1)))
            kbd.append(np.tile([mat.k_warp_bend, mat.k_weft_bend, mat.k_shear_bend], (len(T), 1)))
            dens.append(np.full(len(T), mat.density))
            m, gid, off = g.seams.flat()
            members.append(m + base)
            gids.append(gid + gbase)
            offs.append(off)
            slices.append((base, base + n))
            thickness = max(thickness, mat.thickness)
            base += n
            gbase += g.seams.n_groups
        T = np.concatenate(tris)
        P2 = np.concatenate(lay)
        X = np.concatenate(pos)
        n = len(P2)
        p = P2[T]
        E2 = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        det = np.linalg.det(E2)
        if np.any(np.abs(det) <= 1e-14):
            raise ValidationError(f"degenerate rest triangle {int(np.argmin(np.abs(det)))}")
        Minv = np.linalg.inv(E2)
        # rest midpoints of edges opposite vertices 0, 1, 2
        Dmid = np.stack([0.5 * (p[:, 0] - p[:, 1]), 0.5 * (p[:, 0] - p[:, 2])], axis=2)
        Dinv = np.linalg.inv(Dmid)
        area = 0.5 * np.abs(det)
        dens = np.concatenate(dens)
        mass = np.zeros(n)
        for k in range(3):
            np.add.at(mass, T[:, k], dens * area / 3.0)
        if np.any(mass <= 0):
            raise ValidationError("every cloth vertex needs a positive lumped mass")
        adj = face_adjacency(T)
        members = np.concatenate(members).astype(np.int64)
        gids = np.concatenate(gids).astype(np.int64)
        offs = np.concatenate(offs).reshape(-1, 3)
        vgroup = -np.ones(n, dtype=np.int64)
        vgroup[members] = gids
        H = seam_hinges(T, vgroup)
        owner = np.searchsorted(np.array([s[1] for s in slices]), H[:, 0], side="right") \
            if len(H) else np.zeros(0, int)
        for h in range(len(H)):
            mat = garments[int(owner[h])].material
            hinge_k.append(mat.seam_bend_stiffness)
            hinge_kd.append(mat.seam_bend_damping)
        rest_h = np.array([hinge_angle_grad(X[a], X[b], X[c1], X[c2])[0] for a, b, c1, c2, _, _ in H])
        coef = np.zeros(len(H))
        for h, (a, b, c1, c2, _, _) in enumerate(H):
            e2 = np.sum((P2[b] - P2[a]) ** 2)
            a1 = 0.5 * abs(_cross2(P2[b] - P2[a], P2[c1] - P2[a]))
            a2 = 0.5 * abs(_cross2(P2[H[h, 4]] - P2[H[h, 5]], P2[c2] - P2[H[h, 5]]))
            coef[h] = 3.0 * e2 / (a1 + a2)
        if rest_curvature == "flat":
            rest = np.zeros((len(T), 3))
        elif rest_curvature == "initial":
            rest = shape_operators(X, T, Minv, Dinv, adj)
        else:
            raise ValueError(f"unknown rest_curvature {rest_curvature!r}")
        return cls(T, P2, Minv, Dinv, adj, area, np.concatenate(kst), np.concatenate(kbd), rest,
                   mass, thickness, members, gids, offs, vgroup, H, rest_h.reshape(-1), coef,
                   np.array(hinge_k, float), np.array(hinge_kd, float), tuple(slices))
