"""Simulation proxies: drop decorative panels, replay them afterwards by world-space offsets."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .bvh import closest_points
from .errors import ProxyError
from .garment import GarmentSheet
from .mesh import PatternLayout2D, TriMesh3
from .seams import build_seam_groups

ATTACH_FACTOR = 2.0


@dataclass(frozen=True, eq=False)
class ProxyMap:
    """How to rebuild the detailed garment from a proxy.

    ``kept[i]`` is the detailed index of proxy vertex i. Each dropped detailed
    vertex ``dropped[k]`` hangs off proxy triangle ``attach_tri[k]`` at
    barycentric ``attach_bary[k]`` plus the world-space ``offset[k]``.
    """

    n_detailed: int
    kept: np.ndarray
    dropped: np.ndarray
    attach_tri: np.ndarray
    attach_bary: np.ndarray
    offset: np.ndarray

    @property
    def is_identity(self):
        return len(self.dropped) == 0


def generate_proxy(garment: GarmentSheet, drop_tags=()):
    """Remove panels whose semantic tag is in ``drop_tags``; returns (proxy, ProxyMap)."""
    drop_tags = set(drop_tags)
    n = garment.n_vertices
    pid = garment.layout2d.panel_id
    dropped_panels = sorted(p for p, tag in garment.panel_semantics.items() if tag in drop_tags)
    drop_v = np.isin(pid, dropped_panels)
    if not drop_v.any():
        ident = ProxyMap(n, np.arange(n), np.zeros(0, np.int64), np.zeros(0, np.int64),
                         np.zeros((0, 3)), np.zeros((0, 3)))
        return garment, ident
    if drop_v.all():
        raise ProxyError("every panel would be dropped", dropped_panels)
    kept = np.flatnonzero(~drop_v)
    dropped = np.flatnonzero(drop_v)
    remap = -np.ones(n, np.int64)
    remap[kept] = np.arange(len(kept))
    T = garment.mesh3d.triangles
    keep_t = ~drop_v[T].any(axis=1)
    Tp = remap[T[keep_t]]
    P3 = garment.mesh3d.positions
    proxy_mesh = TriMesh3(P3[kept], Tp)
    p, tri, bary, dist = closest_points(P3[dropped], proxy_mesh)
    limit = ATTACH_FACTOR * garment.material.thickness
    far = dist > limit
    if far.any():
        bad = sorted(set(int(pid[v]) for v in dropped[far]))
        raise ProxyError(f"panel(s) {bad} have vertices farther than {limit:g} cm from the kept "
                         "surface", bad)
    pairs = garment.seams.pairs
    if len(pairs):
        ok = ~drop_v[pairs].any(axis=1)
        pairs = remap[pairs[ok]]
    layout = PatternLayout2D(garment.layout2d.positions2d[kept], Tp, pid[kept])
    sem = {k: v for k, v in garment.panel_semantics.items() if k not in dropped_panels}
    proxy = replace(garment, mesh3d=proxy_mesh, layout2d=layout,
                    seams=build_seam_groups(pairs, P3[kept]), panel_semantics=sem)
    pmap = ProxyMap(n, kept, dropped, tri, bary, P3[dropped] - p)
    return proxy, pmap


def reconstitute(detailed: GarmentSheet, proxy_positions, pmap: ProxyMap,
                 proxy_triangles=None):
    """Detailed garment with kept vertices at ``proxy_positions`` and dropped ones replayed."""
    X = np.asarray(proxy_positions, float)
    if pmap.is_identity:
        return detailed.with_positions(X)
    if proxy_triangles is None:
        remap = -np.ones(pmap.n_detailed, np.int64)
        remap[pmap.kept] = np.arange(len(pmap.kept))
        T = detailed.mesh3d.triangles
        proxy_triangles = remap[T[(remap[T] >= 0).all(axis=1)]]
    out = np.empty((pmap.n_detailed, 3))
    out[pmap.kept] = X
    corners = X[proxy_triangles[pmap.attach_tri]]
    out[pmap.dropped] = np.einsum("ij,ijk->ik", pmap.attach_bary, corners) + pmap.offset
    return detailed.with_positions(out)
