"""Seam pairs, seam groups and per-member offsets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class SeamSpec:
    """Seam vertex pairs with their derived groups.

    ``groups[g]`` holds sorted member vertex ids, ``offsets[g]`` the matching
    (k, 3) offsets from the group centroid at import time. Groups are ordered by
    their smallest member, so the result does not depend on pair order.
    """

    pairs: np.ndarray
    groups: tuple
    offsets: tuple

    @property
    def n_groups(self):
        return len(self.groups)

    def group_of(self, n_vertices):
        """Per-vertex group id, -1 for vertices in no seam."""
        out = np.full(n_vertices, -1, dtype=np.int64)
        for g, members in enumerate(self.groups):
            out[members] = g
        return out

    def members(self):
        if not self.groups:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(self.groups)

    def flat(self):
        """(members, group_index, offsets) concatenated across all groups."""
        if not self.groups:
            return (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros((0, 3)))
        members = np.concatenate(self.groups)
        gid = np.concatenate([np.full(len(m), g) for g, m in enumerate(self.groups)])
        offs = np.concatenate(self.offsets)
        return members, gid, offs


def empty_seams():
    return SeamSpec(np.zeros((0, 2), dtype=np.int64), (), ())


def build_seam_groups(pairs, positions) -> SeamSpec:
    """Union seam pairs into groups; offsets are taken from ``positions``."""
    positions = np.asarray(positions, dtype=np.float64)
    n = len(positions)
    p = np.asarray(pairs, dtype=np.int64).reshape(-1, 2) if len(pairs) else np.zeros((0, 2), np.int64)
    for a, b in p:
        if not (0 <= a < n and 0 <= b < n):
            raise ValidationError(f"seam pair ({a}, {b}) references a vertex outside [0, {n})")
    if len(p) == 0:
        return empty_seams()
    involved = np.unique(p)
    local = np.searchsorted(involved, p)
    m = len(involved)
    graph = coo_matrix((np.ones(len(local)), (local[:, 0], local[:, 1])), shape=(m, m))
    _, labels = connected_components(graph, directed=False)
    groups = []
    for lab in np.unique(labels):
        groups.append(np.sort(involved[labels == lab]))
    groups.sort(key=lambda g: g[0])
    offsets = []
    for g in groups:
        x = positions[g]
        offsets.append(x - x.mean(axis=0))
    groups = tuple(g.copy() for g in groups)
    for g in groups:
        g.setflags(write=False)
    return SeamSpec(p.copy(), groups, tuple(offsets))
