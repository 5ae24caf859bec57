"""Small on-disk outfits used by the tests, the acceptance suite and the README."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .bvh import closest_points
from .io import BodyBundle, GarmentEntry, OutfitManifest, save_body_bundle, save_garment_bundle, \
    save_manifest
from .mesh import TriMesh3
from .primitives import icosphere, tube_garment
from .rig import SkinWeights, normalize_weights

SPHERE_RADIUS = 10.0


def sphere_rig(body: TriMesh3, softness=2.0):
    """Two joints split smoothly at the equator (y = 0)."""
    y = body.positions[:, 1]
    up = 1.0 / (1.0 + np.exp(-y / softness))
    return SkinWeights(("lower", "upper"), normalize_weights(np.stack([1 - up, up], axis=1)))


def sphere_body(radius=SPHERE_RADIUS, subdivisions=3):
    return icosphere(radius, subdivisions)


def resting_tube(body: TriMesh3, radius, height=8.0, clearance=0.202, n_around=32, n_high=6,
                 layer=0, name="tube"):
    """Open tube hanging on ``body``; every column is shifted in y so that its lower rim
    vertex lies ``clearance`` cm from the surface.

    The layout gets the same per-column shift, which keeps it an exact unrolling
    of the (still cylindrical) 3D tube.
    """
    g = tube_garment(radius, height, n_around, n_high, layer=layer, name=name)
    X = g.mesh3d.positions.copy()
    U = g.layout2d.positions2d.copy()
    c = body.positions.mean(axis=0)
    r_max = float(np.linalg.norm(body.positions - c, axis=1).max())
    lo = c[1] + np.sqrt(max(r_max ** 2 - radius ** 2, 0.0))
    hi = c[1] + r_max + clearance + 1.0
    cols = n_around + 1
    for i in range(cols):
        col = np.arange(i, len(X), cols)
        p = X[col[0]].copy()

        def gap(y0):
            p[1] = y0
            return closest_points(p[None], body)[3][0] - clearance

        dy = brentq(gap, lo, hi, xtol=1e-13) - X[col[0], 1]
        X[col, 1] += dy
        U[col, 1] += dy
    return g.with_positions(X).with_layout(U).reseamed()


def write_identity_outfit(root, radius=8.5, rigged=True):
    """Sphere body that is both source and target, one tube resting on it."""
    root = Path(root)
    body = sphere_body()
    save_body_bundle(BodyBundle(body, sphere_rig(body) if rigged else None, "sphere"),
                     root / "bodies" / "sphere")
    tube = resting_tube(body, radius, height=3.0, n_high=3)
    save_garment_bundle(tube, root / "garments" / "tube")
    m = OutfitManifest({"sphere": "bodies/sphere"}, "sphere",
                       [GarmentEntry("garments/tube", "sphere")], root=root)
    save_manifest(m, root / "manifest.json")
    return root / "manifest.json"


def write_two_layer_outfit(root, scale=(1.0, 1.0, 1.0), rigged=True):
    """Two stacked tubes on a sphere; the target body is the sphere scaled by ``scale``."""
    root = Path(root)
    body = sphere_body()
    target = TriMesh3(body.positions * np.asarray(scale, float), body.triangles)
    save_body_bundle(BodyBundle(body, sphere_rig(body) if rigged else None, "source"),
                     root / "bodies" / "source")
    save_body_bundle(BodyBundle(target, sphere_rig(target) if rigged else None, "target"),
                     root / "bodies" / "target")
    inner = resting_tube(body, 8.5, name="inner", layer=0)
    outer = resting_tube(body, 9.0, height=6.0, name="outer", layer=1)
    save_garment_bundle(inner, root / "garments" / "inner")
    save_garment_bundle(outer, root / "garments" / "outer")
    m = OutfitManifest({"source": "bodies/source", "target": "bodies/target"}, "target",
                       [GarmentEntry("garments/inner", "source", 0),
                        GarmentEntry("garments/outer", "source", 1)], root=root)
    save_manifest(m, root / "manifest.json")
    return root / "manifest.json"


def interpenetrating_tubes(radii=(10.5, 10.35), height=12.0, n_around=48, n_high=8):
    """Tubes around the sphere body whose layer order disagrees with their radii.

    Layer k gets ``radii[k]``; with a decreasing sequence every later layer
    starts inside the earlier ones and the drape has to push it out.
    """
    return [tube_garment(r, height, n_around, n_high, y0=-height / 2, layer=k, name=f"tube{k}")
            for k, r in enumerate(radii)]
