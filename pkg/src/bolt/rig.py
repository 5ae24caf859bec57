"""Skinning weight transfer from a body rig to draped cloth."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_is_fitted
from .bvh import TriangleBVH, closest_points, raycast
from .errors import ConfigurationError, RigTransferError, ValidationError
from .mesh import TriMesh3, vertex_adjacency
from .seams import SeamSpec

log = logging.getLogger(__name__)

MAX_INFLUENCES = 8
NORMAL_HIT = "normal_hit"
PROXIMAL_FALLBACK = "proximal_fallback"
RAY_START_OFFSET = 1e-3


@dataclass(frozen=True, eq=False)
class SkinWeights:
    """Per-vertex joint weights stored densely as an (N, J) matrix."""

    joints: tuple
    matrix: np.ndarray

    def __post_init__(self):
        W = np.array(self.matrix, dtype=np.float64, copy=True)
        if W.ndim != 2 or W.shape[1] != len(self.joints):
            raise ValidationError(f"weight matrix must be (n, {len(self.joints)}), got {W.shape}")
        if len(set(self.joints)) != len(self.joints):
            raise ValidationError("joint names must be unique")
        if np.any(W < 0) or not np.all(np.isfinite(W)):
            raise ValidationError("skin weights must be finite and non-negative")
        s = W.sum(axis=1)
        if len(W) and np.abs(s - 1.0).max() > 1e-6:
            raise ValidationError(f"skin weights do not sum to 1 (worst {s[np.argmax(np.abs(s - 1))]:.8g})")
        if len(W) and np.count_nonzero(W, axis=1).max() > MAX_INFLUENCES:
            raise ValidationError(f"more than {MAX_INFLUENCES} influences on a vertex")
        W.setflags(write=False)
        object.__setattr__(self, "joints", tuple(str(j) for j in self.joints))
        object.__setattr__(self, "matrix", W)

    @property
    def n_vertices(self):
        return len(self.matrix)

    @classmethod
    def from_sparse(cls, joints, vertices):
        W = np.zeros((len(vertices), len(joints)))
        for i, row in enumerate(vertices):
            for j, w in row:
                if not 0 <= int(j) < len(joints):
                    raise ValidationError(f"vertex {i} references unknown joint {j}")
                W[i, int(j)] += float(w)
        return cls(tuple(joints), normalize_weights(W))

    def to_sparse(self):
        rows = []
        for w in self.matrix:
            nz = np.flatnonzero(w)
            rows.append([[int(j), float(w[j])] for j in nz])
        return {"joints": list(self.joints), "vertices": rows}

    def dumps(self):
        return json.dumps(self.to_sparse(), indent=1)

    @classmethod
    def loads(cls, text):
        d = json.loads(text)
        try:
            return cls.from_sparse(d["joints"], d["vertices"])
        except KeyError as exc:
            raise ValidationError(f"weights JSON lacks key {exc}") from exc


def normalize_weights(W, max_influences=MAX_INFLUENCES):
    """Clip negatives, keep the largest ``max_influences`` entries per row, rescale rows to 1."""
    W = np.maximum(np.asarray(W, dtype=np.float64), 0.0).copy()
    if W.shape[1] > max_influences:
        # stable sort keeps the lower joint index on ties
        order = np.argsort(-W, axis=1, kind="stable")
        drop = order[:, max_influences:]
        np.put_along_axis(W, drop, 0.0, axis=1)
    s = W.sum(axis=1, keepdims=True)
    if np.any(s <= 0):
        raise ValidationError(f"{int((s <= 0).sum())} vertex weight row(s) are all zero")
    return W / s


def orient_normals(cloth_positions, normals, body: TriMesh3):
    """Flip all normals when most of them point toward the body's center."""
    c = body.positions.mean(axis=0)
    votes = np.einsum("ij,ij->i", normals, cloth_positions - c)
    if np.count_nonzero(votes < 0) > np.count_nonzero(votes > 0):
        log.info("cloth normals face the body; flipping")
        return -normals, True
    return normals, False


def smooth_normals_for_transfer(cloth: TriMesh3, rounds=3, factor=0.5, normals=None):
    """Blend each normal toward the mean of its neighbors ``rounds`` times."""
    if rounds < 0:
        raise ConfigurationError("smoothing rounds must be >= 0")
    N = cloth.vertex_normals() if normals is None else np.asarray(normals, float)
    N = N.copy()
    if rounds == 0:
        return N
    indptr, indices = vertex_adjacency(cloth.n_vertices, cloth.triangles)
    deg = np.diff(indptr)
    rows = np.repeat(np.arange(cloth.n_vertices), deg)
    for _ in range(rounds):
        acc = np.zeros_like(N)
        np.add.at(acc, rows, N[indices])
        mean = acc / np.maximum(deg, 1)[:, None]
        blend = np.where(deg[:, None] > 0, (1.0 - factor) * N + factor * mean, N)
        ln = np.linalg.norm(blend, axis=1, keepdims=True)
        N = np.where(ln > 1e-12, blend / np.where(ln > 0, ln, 1.0), N)
    return N


def _interp(body_W, body_T, tri, bary):
    return np.einsum("ij,ijk->ik", bary, body_W[body_T[tri]])


def transfer_by_proximity(cloth: TriMesh3, body: TriMesh3, body_weights: SkinWeights,
                          bvh: TriangleBVH | None = None, max_influences=MAX_INFLUENCES):
    """Closest-point transfer: each cloth vertex copies the weights at its nearest body point."""
    _, tri, bary, _ = closest_points(cloth.positions, body, bvh)
    W = _interp(body_weights.matrix, body.triangles, tri, bary)
    return SkinWeights(body_weights.joints, normalize_weights(W, max_influences))


def transfer_by_normal(cloth: TriMesh3, body: TriMesh3, body_weights: SkinWeights, max_ray=15.0,
                       normals=None, bvh: TriangleBVH | None = None,
                       max_influences=MAX_INFLUENCES):
    """Cast from each cloth vertex against its normal; fall back to the nearest body point.

    Returns (weights, provenance) where provenance holds one of
    ``"normal_hit"`` / ``"proximal_fallback"`` per vertex.
    """
    if body_weights.n_vertices != body.n_vertices:
        raise ValidationError("body weights do not match the body vertex count")
    bvh = bvh or TriangleBVH.build(body)
    X = cloth.positions
    N = cloth.vertex_normals() if normals is None else np.asarray(normals, float)
    N, _ = orient_normals(X, N, body)
    origins = X + RAY_START_OFFSET * N
    t, tri, bary = raycast(origins, -N, body, bvh, 0.0, max_ray + RAY_START_OFFSET,
                           front_only=True)
    hit = tri >= 0
    _, ctri, cbary, cdist = closest_points(X, body, bvh)
    orphan = np.flatnonzero(~hit & (cdist > max_ray))
    if orphan.size:
        raise RigTransferError(
            f"{orphan.size} cloth vertex(es) found no body point within {max_ray:g} cm: "
            f"{orphan[:20].tolist()}", orphan.tolist())
    tri = np.where(hit, tri, ctri)
    bary = np.where(hit[:, None], bary, cbary)
    W = _interp(body_weights.matrix, body.triangles, tri, bary)
    prov = np.where(hit, NORMAL_HIT, PROXIMAL_FALLBACK)
    return SkinWeights(body_weights.joints, normalize_weights(W, max_influences)), prov


def enforce_seam_weight_continuity(weights: SkinWeights, seams: SeamSpec):
    """Give every seam group member the group's mean weight vector."""
    W = weights.matrix.copy()
    for g in seams.groups:
        W[g] = W[g].mean(axis=0)
    return SkinWeights(weights.joints, normalize_weights(W))


def seam_weight_spread(weights: SkinWeights, seams: SeamSpec):
    """Largest intra-group difference of any weight component."""
    spread = 0.0
    for g in seams.groups:
        w = weights.matrix[g]
        spread = max(spread, float((w.max(axis=0) - w.min(axis=0)).max()))
    return spread


class SkinWeightTransfer(TransformerMixin, BaseEstimator):
    """Transfer rig weights to cloth meshes.

    ``fit(body, body_weights)`` stores the rig; ``transform(cloth)`` returns
    the cloth weights and records ``provenance_`` and ``fallback_fraction_``.
    """

    def __init__(self, method="normal", max_ray=15.0, smoothing_rounds=3, smoothing_factor=0.5,
                 max_influences=MAX_INFLUENCES):
        self.method = method
        self.max_ray = max_ray
        self.smoothing_rounds = smoothing_rounds
        self.smoothing_factor = smoothing_factor
        self.max_influences = max_influences

    def fit(self, body: TriMesh3, body_weights: SkinWeights):
        if self.method not in ("normal", "proximal"):
            raise ConfigurationError(f"rig method must be 'normal' or 'proximal', not {self.method!r}")
        if not 1 <= self.max_influences <= MAX_INFLUENCES:
            raise ConfigurationError(f"max_influences must lie in [1, {MAX_INFLUENCES}]")
        if body_weights.n_vertices != body.n_vertices:
            raise ValidationError("body weights do not match the body vertex count")
        self.body_ = body
        self.body_weights_ = body_weights
        self.bvh_ = TriangleBVH.build(body)
        return self

    def transform(self, cloth: TriMesh3, seams: SeamSpec | None = None):
        check_is_fitted(self, ["body_"])
        if self.method == "proximal":
            W = transfer_by_proximity(cloth, self.body_, self.body_weights_, self.bvh_,
                                      self.max_influences)
            prov = np.full(cloth.n_vertices, PROXIMAL_FALLBACK)
        else:
            N = smooth_normals_for_transfer(cloth, self.smoothing_rounds, self.smoothing_factor)
            W, prov = transfer_by_normal(cloth, self.body_, self.body_weights_, self.max_ray, N,
                                         self.bvh_, self.max_influences)
        if seams is not None and seams.n_groups:
            W = enforce_seam_weight_continuity(W, seams)
        self.provenance_ = prov
        self.fallback_fraction_ = float(np.mean(prov == PROXIMAL_FALLBACK)) if len(prov) else 0.0
        return W
