"""On-disk formats: OBJ meshes, garment/body bundles, outfit manifests and weight files.

Bundles are directories tagged ``bolt-bundle/1``. A garment bundle holds
``garment.obj`` (3D positions, with the 2D layout as texture coordinates) and
``garment.json``; a body bundle holds ``body.obj`` and optionally ``rig.json``.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cloth.params import MaterialParams
from .errors import ConfigurationError, ValidationError
from .garment import GarmentSheet
from .mesh import PatternLayout2D, TriMesh3
from .rig import SkinWeights
from .seams import build_seam_groups

BUNDLE_FORMAT = "bolt-bundle/1"
MANIFEST_FORMAT = "bolt-manifest/1"
REPORT_FORMAT = "bolt-report/1"


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def obj_text(positions, triangles, uv=None, comment=None):
    """OBJ text with full float precision; ``uv`` rows are paired with vertices."""
    out = []
    if comment:
        out.append(f"# {comment}")
    for p in np.asarray(positions, float):
        out.append("v %.17g %.17g %.17g" % (p[0], p[1], p[2]))
    if uv is not None:
        for t in np.asarray(uv, float):
            out.append("vt %.17g %.17g" % (t[0], t[1]))
        for a, b, c in np.asarray(triangles, np.int64) + 1:
            out.append(f"f {a}/{a} {b}/{b} {c}/{c}")
    else:
        for a, b, c in np.asarray(triangles, np.int64) + 1:
            out.append(f"f {a} {b} {c}")
    return "\n".join(out) + "\n"


def write_obj(path, positions, triangles, uv=None, comment=None):
    _atomic_write(path, obj_text(positions, triangles, uv, comment))


def read_obj(path):
    """Triangle OBJ reader: (positions, triangles, uv or None).

    Texture coordinates must be indexed like the vertices (as written by
    :func:`write_obj`); polygons with more than three corners are rejected.
    """
    V, VT, F, FT = [], [], [], []
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            try:
                if tag == "v":
                    V.append([float(x) for x in parts[1:4]])
                elif tag == "vt":
                    VT.append([float(x) for x in parts[1:3]])
                elif tag == "f":
                    if len(parts) != 4:
                        raise ValidationError(f"{path}:{ln}: only triangles are supported")
                    corners = [c.split("/") for c in parts[1:]]
                    F.append([int(c[0]) - 1 for c in corners])
                    if all(len(c) > 1 and c[1] for c in corners):
                        FT.append([int(c[1]) - 1 for c in corners])
            except ValidationError:
                raise
            except ValueError as exc:
                raise ValidationError(f"{path}:{ln}: cannot parse '{line.strip()}'") from exc
    V = np.array(V, float).reshape(-1, 3)
    T = np.array(F, np.int64).reshape(-1, 3)
    uv = None
    if VT:
        if len(FT) != len(F) or not np.array_equal(np.array(FT, np.int64).reshape(-1, 3), T) \
                or len(VT) != len(V):
            raise ValidationError(f"{path}: texture coordinates must be indexed like vertices")
        uv = np.array(VT, float)
    return V, T, uv


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc


def _dump_json(path, data):
    _atomic_write(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def garment_sidecar(g: GarmentSheet):
    return {
        "format": BUNDLE_FORMAT,
        "kind": "garment",
        "name": g.name,
        "layer": int(g.layer),
        "panel_id": g.layout2d.panel_id.tolist(),
        "panel_semantics": {str(k): v for k, v in sorted(g.panel_semantics.items())},
        "seam_pairs": np.asarray(g.seams.pairs).tolist(),
        "material": g.material.to_dict(),
    }


def save_garment_bundle(g: GarmentSheet, path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    write_obj(path / "garment.obj", g.mesh3d.positions, g.mesh3d.triangles, g.layout2d.positions2d)
    _dump_json(path / "garment.json", garment_sidecar(g))


def load_garment_bundle(path) -> GarmentSheet:
    path = Path(path)
    meta = _read_json(path / "garment.json")
    _check_format(meta, path)
    V, T, uv = read_obj(path / "garment.obj")
    if uv is None:
        raise ValidationError(f"{path}/garment.obj has no 2D layout (vt records)")
    try:
        pid = np.asarray(meta["panel_id"], np.int64)
        layout = PatternLayout2D(uv, T, pid)
        sem = {int(k): v for k, v in meta.get("panel_semantics", {}).items()}
        mat = MaterialParams.from_dict(meta.get("material", {}))
        return GarmentSheet(TriMesh3(V, T), layout, build_seam_groups(meta.get("seam_pairs", []), V),
                            mat, int(meta.get("layer", 0)), sem, str(meta.get("name", path.name)))
    except KeyError as exc:
        raise ValidationError(f"{path}/garment.json lacks key {exc}") from exc


@dataclass
class BodyBundle:
    mesh: TriMesh3
    weights: SkinWeights | None = None
    name: str = "body"


def save_body_bundle(body: BodyBundle, path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    write_obj(path / "body.obj", body.mesh.positions, body.mesh.triangles)
    meta = {"format": BUNDLE_FORMAT, "kind": "body", "name": body.name}
    _dump_json(path / "body.json", meta)
    if body.weights is not None:
        save_weights(body.weights, path / "rig.json")


def load_body_bundle(path) -> BodyBundle:
    path = Path(path)
    name = path.name
    if (path / "body.json").exists():
        meta = _read_json(path / "body.json")
        _check_format(meta, path)
        name = meta.get("name", name)
    V, T, _ = read_obj(path / "body.obj")
    mesh = TriMesh3(V, T)
    weights = None
    if (path / "rig.json").exists():
        weights = load_weights(path / "rig.json")
        if weights.n_vertices != mesh.n_vertices:
            raise ValidationError(f"{path}/rig.json has {weights.n_vertices} vertices, "
                                  f"body.obj has {mesh.n_vertices}")
    return BodyBundle(mesh, weights, name)


def save_weights(w: SkinWeights, path):
    _atomic_write(path, w.dumps() + "\n")


def load_weights(path) -> SkinWeights:
    with open(path) as fh:
        return SkinWeights.loads(fh.read())


def _check_format(meta, path):
    fmt = meta.get("format")
    if fmt != BUNDLE_FORMAT:
        raise ValidationError(f"{path}: unsupported bundle format {fmt!r} (expected {BUNDLE_FORMAT})")


def validate_bundle(path):
    """Load a garment or body bundle; returns (kind, summary dict). Raises on problems."""
    path = Path(path)
    if not path.is_dir():
        raise ValidationError(f"{path} is not a bundle directory")
    if (path / "garment.json").exists():
        g = load_garment_bundle(path)
        return "garment", {"name": g.name, "vertices": g.n_vertices,
                           "triangles": g.mesh3d.n_triangles, "panels": len(g.layout2d.panels),
                           "seam_groups": g.seams.n_groups, "layer": g.layer}
    if (path / "body.obj").exists():
        b = load_body_bundle(path)
        return "body", {"name": b.name, "vertices": b.mesh.n_vertices,
                        "triangles": b.mesh.n_triangles,
                        "joints": len(b.weights.joints) if b.weights is not None else 0}
    raise ValidationError(f"{path}: neither garment.json nor body.obj found")


@dataclass
class GarmentEntry:
    bundle: str
    source: str
    layer: int | None = None
    drop_tags: tuple = ()


@dataclass
class OutfitManifest:
    """Outfit description; paths are resolved against ``root``."""

    bodies: dict
    target: str
    garments: list
    config: dict = field(default_factory=dict)
    root: Path = Path(".")

    def __post_init__(self):
        if self.target not in self.bodies:
            raise ValidationError(f"target body '{self.target}' is not declared")
        for i, e in enumerate(self.garments):
            if e.source not in self.bodies:
                raise ValidationError(f"garment {i} ('{e.bundle}') uses undeclared source body "
                                      f"'{e.source}'")

    def resolve(self, p):
        p = Path(p)
        return p if p.is_absolute() else self.root / p

    @classmethod
    def from_dict(cls, d, root="."):
        if d.get("format", MANIFEST_FORMAT) != MANIFEST_FORMAT:
            raise ValidationError(f"unsupported manifest format {d.get('format')!r}")
        try:
            entries = []
            for e in d.get("garments", []):
                layer = e.get("layer")
                entries.append(GarmentEntry(str(e["bundle"]), str(e["source"]),
                                            None if layer is None else int(layer),
                                            tuple(e.get("drop_tags", ()))))
            cfg = d.get("config", {})
            if not isinstance(cfg, dict):
                raise ConfigurationError("manifest config must be an object")
            return cls(dict(d["bodies"]), str(d["target"]), entries, cfg, Path(root))
        except KeyError as exc:
            raise ValidationError(f"manifest lacks key {exc}") from exc

    def to_dict(self):
        return {"format": MANIFEST_FORMAT, "bodies": self.bodies, "target": self.target,
                "garments": [{"bundle": e.bundle, "source": e.source, "layer": e.layer,
                              "drop_tags": list(e.drop_tags)} for e in self.garments],
                "config": self.config}


def load_manifest(path) -> OutfitManifest:
    path = Path(path)
    return OutfitManifest.from_dict(_read_json(path), path.parent)


def save_manifest(m: OutfitManifest, path):
    _dump_json(path, m.to_dict())
