"""Warp/weft tangent frames carried between the 2D pattern and the 3D garment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import PatternError
from ..mesh import PatternLayout2D, TriMesh3, check_paired

RANK_TOL = 1e-10

# maps the three corner positions of a triangle (as columns) to its two edge vectors
EDGE_SELECT = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def edge_matrices(positions, triangles):
    """Per triangle ``[p1 - p0, p2 - p0]`` as (T, d, 2)."""
    p = np.asarray(positions, float)[triangles]
    return np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)


@dataclass(frozen=True, eq=False)
class TangentBinding:
    """Per triangle, ``M`` inverts the rest 2D edge matrix.

    Columns of ``M`` are the bind weights: edge-space coordinates of the unit
    warp (x) and weft (y) directions, so ``E3 @ M`` carries them into 3D.
    """

    M: np.ndarray
    triangles: np.ndarray

    @property
    def warp_weights(self):
        return self.M[:, :, 0]

    @property
    def weft_weights(self):
        return self.M[:, :, 1]

    def frames(self, positions3d):
        """3x2 tangent frames ``F = E3 M`` for the given 3D positions."""
        return edge_matrices(positions3d, self.triangles) @ self.M


def bind_tangents(layout2d: PatternLayout2D, mesh3d: TriMesh3 | None = None) -> TangentBinding:
    if mesh3d is not None:
        check_paired(mesh3d, layout2d)
    E2 = edge_matrices(layout2d.positions2d, layout2d.triangles)
    det = E2[:, 0, 0] * E2[:, 1, 1] - E2[:, 0, 1] * E2[:, 1, 0]
    bad = np.flatnonzero(np.abs(det) <= 1e-14)
    if bad.size:
        raise PatternError(f"2D edge matrix of triangle {int(bad[0])} is singular", bad.tolist())
    return TangentBinding(np.linalg.inv(E2), layout2d.triangles)


def polar_3x2(F, triangle=None):
    """Polar factors ``F = R S``: ``R`` (3x2) orthonormal columns, ``S`` (2x2) symmetric PSD."""
    ids = None if triangle is None else [triangle]
    R, S = polar_frames(np.asarray(F, float)[None], ids)
    return R[0], S[0]


def polar_frames(F, triangles=None):
    """Batched :func:`polar_3x2` over (T, 3, 2) frames."""
    U, sig, Vt = np.linalg.svd(F, full_matrices=False)
    bad = np.flatnonzero(sig[:, 1] <= RANK_TOL * np.maximum(sig[:, 0], 1e-300))
    if bad.size:
        ids = bad if triangles is None else np.asarray(triangles)[bad]
        raise PatternError(
            f"tangent frame of triangle {int(ids[0])} is rank deficient (crumpled)", ids.tolist()
        )
    R = U @ Vt
    S = np.einsum("tji,tj,tjk->tik", Vt, sig, Vt)
    return R, 0.5 * (S + S.transpose(0, 2, 1))


def build_target_frames(binding: TangentBinding, source_positions, target_positions,
                        mode="preserve_fit"):
    """Desired 3D frames on the target garment and their edge-space binding.

    ``loose`` keeps only the rotation of the target frames; ``preserve_fit``
    puts the source stretch back on (``R_target @ S_ref``). Returns
    ``(frames, B)`` where ``B = pinv(E3_target) @ frames`` is (T, 2, 2).
    """
    F_tgt = binding.frames(target_positions)
    R_tgt, _ = polar_frames(F_tgt)
    if mode == "loose":
        frames = R_tgt
    elif mode == "preserve_fit":
        _, S_ref = polar_frames(binding.frames(source_positions))
        frames = R_tgt @ S_ref
    else:
        raise ValueError(f"unknown frame mode {mode!r}")
    E3 = edge_matrices(target_positions, binding.triangles)
    EtE = np.einsum("tki,tkj->tij", E3, E3)
    B = np.linalg.solve(EtE, np.einsum("tki,tkj->tij", E3, frames))
    return frames, B
