"""Procedural meshes and garments used for fixtures and demos."""

from __future__ import annotations

import numpy as np

from .garment import GarmentSheet
from .mesh import PatternLayout2D, TriMesh3
from .seams import build_seam_groups


def icosphere(radius=1.0, subdivisions=2, center=(0.0, 0.0, 0.0)) -> TriMesh3:
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
             (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(v, float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    V = np.array(verts) * radius + np.asarray(center, float)
    return TriMesh3(V, np.array(faces))


def uv_sphere(radius=1.0, n_lat=16, n_lon=32, hemisphere=False, center=(0.0, 0.0, 0.0)) -> TriMesh3:
    """Latitude/longitude sphere about the z axis; ``hemisphere`` keeps z >= 0 with an open rim."""
    lat_end = np.pi / 2 if hemisphere else np.pi
    verts = [(0.0, 0.0, 1.0)]
    for i in range(1, n_lat + (1 if hemisphere else 0)):
        phi = lat_end * i / n_lat
        for j in range(n_lon):
            th = 2 * np.pi * j / n_lon
            verts.append((np.sin(phi) * np.cos(th), np.sin(phi) * np.sin(th), np.cos(phi)))
    rings = n_lat if hemisphere else n_lat - 1
    faces = []
    for j in range(n_lon):
        faces.append((0, 1 + j, 1 + (j + 1) % n_lon))
    for i in range(rings - 1):
        a0 = 1 + i * n_lon
        b0 = 1 + (i + 1) * n_lon
        for j in range(n_lon):
            j2 = (j + 1) % n_lon
            faces.append((a0 + j, b0 + j, b0 + j2))
            faces.append((a0 + j, b0 + j2, a0 + j2))
    if not hemisphere:
        verts.append((0.0, 0.0, -1.0))
        s = len(verts) - 1
        a0 = 1 + (rings - 1) * n_lon
        for j in range(n_lon):
            faces.append((a0 + j, s, a0 + (j + 1) % n_lon))
    V = np.array(verts) * radius + np.asarray(center, float)
    return TriMesh3(V, np.array(faces))


def grid_panel(width, height, nx, ny, origin=(0.0, 0.0)):
    """Regular triangulated rectangle: (positions2d, triangles), CCW triangles."""
    xs = np.linspace(0.0, width, nx + 1) + origin[0]
    ys = np.linspace(0.0, height, ny + 1) + origin[1]
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    P = np.stack([X.ravel(), Y.ravel()], axis=1)
    tris = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            b = a + 1
            c = a + (nx + 1)
            d = c + 1
            if (i + j) % 2 == 0:
                tris += [(a, b, d), (a, d, c)]
            else:
                tris += [(a, b, c), (b, d, c)]
    return P, np.array(tris, dtype=np.int64)


def tube_garment(radius, height, n_around=24, n_high=6, y0=0.0, center=(0.0, 0.0),
                 layer=0, material=None, name="tube") -> GarmentSheet:
    """Open cylinder about the y axis made of one rolled panel closed by a seam.

    The panel width is the perimeter of the ``n_around``-gon, so the rolled
    mesh is an exact isometry of its layout.
    """
    circ = 2 * n_around * radius * np.sin(np.pi / n_around)
    P2, T = grid_panel(circ, height, n_around, n_high)
    theta = 2 * np.pi * P2[:, 0] / circ
    P3 = np.stack([center[0] + radius * np.sin(theta), y0 + P2[:, 1],
                   center[1] + radius * np.cos(theta)], axis=1)
    cols = n_around + 1
    pairs = [(j * cols, j * cols + n_around) for j in range(n_high + 1)]
    mesh = TriMesh3(P3, T)
    layout = PatternLayout2D(P2, T, np.zeros(len(P2), dtype=np.int64))
    return GarmentSheet(mesh, layout, build_seam_groups(pairs, P3), material=material,
                        layer=layer, panel_semantics={0: "body"}, name=name)


def flat_sheet(width, height, nx, ny, y=0.0, material=None, name="sheet", layer=0) -> GarmentSheet:
    """Single horizontal panel in the xz plane at height ``y`` (normal +y)."""
    P2, T = grid_panel(width, height, nx, ny, origin=(-width / 2, -height / 2))
    P3 = np.stack([P2[:, 0], np.full(len(P2), y), -P2[:, 1]], axis=1)
    mesh = TriMesh3(P3, T)
    layout = PatternLayout2D(P2, T, np.zeros(len(P2), dtype=np.int64))
    return GarmentSheet(mesh, layout, build_seam_groups([], P3), material=material,
                        layer=layer, panel_semantics={0: "body"}, name=name)


def box_mesh(lo, hi) -> TriMesh3:
    """Closed axis-aligned box with outward-facing triangles."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    V = np.array([[lo[0] if i & 1 == 0 else hi[0], lo[1] if i & 2 == 0 else hi[1],
                   lo[2] if i & 4 == 0 else hi[2]] for i in range(8)])
    F = np.array([(0, 2, 3), (0, 3, 1), (4, 5, 7), (4, 7, 6), (0, 1, 5), (0, 5, 4),
                  (2, 6, 7), (2, 7, 3), (0, 4, 6), (0, 6, 2), (1, 3, 7), (1, 7, 5)])
    return TriMesh3(V, F)


def merge_meshes(meshes) -> TriMesh3:
    base = np.cumsum([0] + [m.n_vertices for m in meshes])
    return TriMesh3(np.vstack([m.positions for m in meshes]),
                    np.vstack([m.triangles + b for m, b in zip(meshes, base)]))


def armpit_pinch_fixture(gap=0.5, sleeve_radius=4.0, arm_radius=3.0):
    """Torso slab and arm ellipsoid with a sleeve that sits closer to the torso than to the arm
    on its inner side.

    Returns (body, labels, sleeve) where ``labels`` is 0 for torso and 1 for arm
    vertices; every sleeve vertex belongs to the arm.
    """
    cx = gap + sleeve_radius
    torso = box_mesh((-12.0, -15.0, -8.0), (gap, 15.0, 8.0))
    arm = icosphere(1.0, 3)
    arm = TriMesh3(arm.positions * np.array([arm_radius, 4 * arm_radius, arm_radius])
                   + np.array([cx, 0.0, 0.0]), arm.triangles)
    body = merge_meshes([torso, arm])
    labels = np.r_[np.zeros(torso.n_vertices, int), np.ones(arm.n_vertices, int)]
    sleeve = tube_garment(sleeve_radius, 16.0, n_around=32, n_high=8, y0=-8.0, center=(cx, 0.0),
                          name="sleeve")
    return body, labels, sleeve


def pocketed_sheet(width=20.0, height=20.0, n=10, pocket_cells=2, lift=0.1, y=0.0,
                   material=None, name="vest") -> GarmentSheet:
    """Flat sheet (panel 0, "body") with a square pocket (panel 1, "pocket") lying ``lift`` above.

    The pocket is sewn to the sheet along its bottom and side borders.
    """
    P2, T = grid_panel(width, height, n, n, origin=(-width / 2, -height / 2))
    h = width / n
    Q2, U = grid_panel(pocket_cells * h, pocket_cells * h, pocket_cells, pocket_cells)
    i0 = n // 2 - pocket_cells // 2
    corner = P2[i0 * (n + 1) + i0]
    Q3 = np.stack([Q2[:, 0] + corner[0], np.full(len(Q2), y + lift), -(Q2[:, 1] + corner[1])], 1)
    P3 = np.stack([P2[:, 0], np.full(len(P2), y), -P2[:, 1]], axis=1)
    base = len(P2)
    pairs = []
    m = pocket_cells + 1
    for j in range(m):
        for i in range(m):
            if j == 0 or i == 0 or i == pocket_cells:
                pairs.append((base + j * m + i, (i0 + j) * (n + 1) + i0 + i))
    pos2 = np.vstack([P2, Q2 + np.array([width, 0.0])])
    pos3 = np.vstack([P3, Q3])
    tris = np.vstack([T, U + base])
    pid = np.r_[np.zeros(len(P2), np.int64), np.ones(len(Q2), np.int64)]
    return GarmentSheet(TriMesh3(pos3, tris), PatternLayout2D(pos2, tris, pid),
                        build_seam_groups(pairs, pos3), material=material,
                        panel_semantics={0: "body", 1: "pocket"}, name=name)


def two_panel_sewn(width=10.0, height=10.0, n=5, gap=2.0, material=None, name="two_panel"):
    """Two flat square panels; the right border of panel 0 is sewn to the left border of panel 1.

    The 3D mesh lies in the z = 0 plane exactly as laid out, so both panels are at rest.
    """
    PA, TA = grid_panel(width, height, n, n)
    PB, TB = grid_panel(width, height, n, n, origin=(width + gap, 0.0))
    P2 = np.vstack([PA, PB])
    T = np.vstack([TA, TB + len(PA)])
    pid = np.r_[np.zeros(len(PA), np.int64), np.ones(len(PB), np.int64)]
    P3 = np.c_[P2, np.zeros(len(P2))]
    pairs = [(j * (n + 1) + n, len(PA) + j * (n + 1)) for j in range(n + 1)]
    return GarmentSheet(TriMesh3(P3, T), PatternLayout2D(P2, T, pid), build_seam_groups(pairs, P3),
                        material=material, panel_semantics={0: "body", 1: "body"}, name=name)
