"""Winding-number signed distance fields on regular grids, and their unions."""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .bvh import TriangleBVH, closest_points
from .bvh import winding_number as _bvh_winding
from .errors import ConfigurationError
from .mesh import TriMesh3

log = logging.getLogger(__name__)

DEFAULT_WINDING_THRESHOLD = 0.25
ON_SURFACE = 1e-12
PERTURBATION = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Node lattice ``origin + cell_size * (i, j, k)`` with ``dims`` nodes per axis."""

    origin: tuple
    cell_size: float
    dims: tuple

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))
        object.__setattr__(self, "dims", tuple(int(x) for x in self.dims))
        if self.cell_size <= 0 or min(self.dims) < 2:
            raise ConfigurationError("grid needs cell_size > 0 and at least 2 nodes per axis")

    @classmethod
    def covering(cls, lo, hi, resolution=128, margin=5.0, cell_size=None):
        """Grid over [lo - margin, hi + margin]; ``resolution`` nodes along the longest axis."""
        lo = np.asarray(lo, float) - margin
        hi = np.asarray(hi, float) + margin
        if cell_size is None:
            cell_size = float((hi - lo).max()) / (resolution - 1)
        dims = np.ceil((hi - lo) / cell_size).astype(int) + 1
        return cls(tuple(lo), float(cell_size), tuple(np.maximum(dims, 2)))

    @property
    def upper(self):
        return np.asarray(self.origin) + self.cell_size * (np.asarray(self.dims) - 1)

    def nodes(self):
        axes = [self.origin[k] + self.cell_size * np.arange(self.dims[k]) for k in range(3)]
        X, Y, Z = np.meshgrid(*axes, indexing="ij")
        return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)


@dataclass(frozen=True, eq=False)
class SampledSDF:
    """Signed distance samples (cm) on the nodes of ``grid``; negative inside.

    ``expanded`` records whether the ``eps_sdf`` outward offset has already
    been applied, ``offset_applied`` the total offset subtracted so far.
    """

    grid: GridSpec
    values: np.ndarray
    winding_threshold: float = DEFAULT_WINDING_THRESHOLD
    offset_applied: float = 0.0
    expanded: bool = False

    @classmethod
    def empty(cls, grid: GridSpec):
        return cls(grid, np.full(grid.dims, np.inf))

    @property
    def origin(self):
        return np.asarray(self.grid.origin)

    @property
    def cell_size(self):
        return self.grid.cell_size

    @property
    def dims(self):
        return self.grid.dims

    def sample(self, points):
        return sample(self, points)


def winding_number(query, mesh: TriMesh3, bvh: TriangleBVH | None = None):
    """Generalized winding number at one or many query points.

    Queries lying on the surface are nudged by 1e-9 cm along the face normal.
    """
    Q = np.array(np.atleast_2d(query), dtype=np.float64)
    bvh = bvh or TriangleBVH.build(mesh)
    p, t, _, d = closest_points(Q, mesh, bvh)
    on = d <= ON_SURFACE
    if on.any():
        Q[on] += PERTURBATION * mesh.face_normals()[t[on]]
    w = _bvh_winding(Q, mesh, bvh)
    return w if np.ndim(query) > 1 else float(w[0])


def build_sdf(mesh: TriMesh3, grid: GridSpec, winding_threshold=DEFAULT_WINDING_THRESHOLD,
              bvh: TriangleBVH | None = None) -> SampledSDF:
    """Unsigned BVH distance at each node, negative where the winding number exceeds the threshold."""
    lo, hi = mesh.bounds()
    need_lo = lo - 2 * grid.cell_size
    need_hi = hi + 2 * grid.cell_size
    if np.any(np.asarray(grid.origin) > need_lo + 1e-9) or np.any(grid.upper < need_hi - 1e-9):
        raise ConfigurationError(
            f"SDF grid must cover [{need_lo.tolist()}, {need_hi.tolist()}] "
            f"(mesh bounds plus two cells); got [{list(grid.origin)}, {grid.upper.tolist()}]"
        )
    bvh = bvh or TriangleBVH.build(mesh)
    nodes = grid.nodes()
    _, _, _, dist = closest_points(nodes, mesh, bvh)
    w = winding_number(nodes, mesh, bvh)
    values = np.where(w > winding_threshold, -dist, dist).reshape(grid.dims)
    return SampledSDF(grid, values, winding_threshold=winding_threshold)


def resample(sdf: SampledSDF, grid: GridSpec) -> SampledSDF:
    """Trilinear resampling onto ``grid``; nodes outside the source grid read +inf."""
    nodes = grid.nodes()
    inside = np.all((nodes >= sdf.origin - 1e-9) & (nodes <= sdf.grid.upper + 1e-9), axis=1)
    vals = np.full(len(nodes), np.inf)
    if inside.any():
        vals[inside] = _trilinear(sdf, nodes[inside])
    return replace(sdf, grid=grid, values=vals.reshape(grid.dims))


def sdf_union(a: SampledSDF, b: SampledSDF, eps_sdf=0.2, mode="per_operand") -> SampledSDF:
    """Minimum of two fields, expanded outward by ``eps_sdf``.

    ``mode="per_operand"`` expands every operand exactly once (operands that
    already carry the expansion are left alone), which makes chains of unions
    associative and commutative. ``mode="per_union"`` subtracts ``eps_sdf``
    at every call.
    """
    if b.grid != a.grid:
        try:
            b = resample(b, a.grid)
        except Exception as exc:
            raise ConfigurationError(f"cannot resample SDF onto union grid: {exc}") from exc
    if mode == "per_operand":
        va = a.values if a.expanded else a.values - eps_sdf
        vb = b.values if b.expanded else b.values - eps_sdf
        values = np.minimum(va, vb)
        offset = max(a.offset_applied if a.expanded else eps_sdf,
                     b.offset_applied if b.expanded else eps_sdf)
        return SampledSDF(a.grid, values, a.winding_threshold, offset, True)
    if mode == "per_union":
        values = np.minimum(a.values, b.values) - eps_sdf
        offset = max(a.offset_applied, b.offset_applied) + eps_sdf
        return SampledSDF(a.grid, values, a.winding_threshold, offset, True)
    raise ConfigurationError(f"unknown union mode {mode!r}")


def _cell_coords(sdf, P):
    dims = np.asarray(sdf.dims)
    g = (P - sdf.origin) / sdf.cell_size
    i0 = np.clip(np.floor(g).astype(np.int64), 0, dims - 2)
    f = g - i0
    return i0, f


def _trilinear(sdf, P):
    i0, f = _cell_coords(sdf, P)
    V = sdf.values
    out = np.zeros(len(P))
    for dx in (0, 1):
        wx = f[:, 0] if dx else 1 - f[:, 0]
        for dy in (0, 1):
            wy = f[:, 1] if dy else 1 - f[:, 1]
            for dz in (0, 1):
                wz = f[:, 2] if dz else 1 - f[:, 2]
                out += wx * wy * wz * V[i0[:, 0] + dx, i0[:, 1] + dy, i0[:, 2] + dz]
    return out


def sample(sdf: SampledSDF, points, step=None):
    """Trilinear value and central-difference gradient at ``points``.

    Points outside the grid are clamped onto it (with a warning).
    Returns scalars for a single point, arrays otherwise.
    """
    P = np.array(np.atleast_2d(points), dtype=np.float64)
    lo = sdf.origin
    hi = sdf.grid.upper
    outside = np.any((P < lo) | (P > hi), axis=1)
    if outside.any():
        log.warning("clamping %d SDF query point(s) onto the grid", int(outside.sum()))
        P = np.clip(P, lo, hi)
    h = 0.5 * sdf.cell_size if step is None else step
    val = _trilinear(sdf, P)
    grad = np.empty_like(P)
    for k in range(3):
        pp = P.copy()
        pm = P.copy()
        pp[:, k] = np.minimum(P[:, k] + h, hi[k])
        pm[:, k] = np.maximum(P[:, k] - h, lo[k])
        span = pp[:, k] - pm[:, k]
        grad[:, k] = (_trilinear(sdf, pp) - _trilinear(sdf, pm)) / np.where(span > 0, span, 1.0)
    if np.ndim(points) == 1:
        return float(val[0]), grad[0]
    return val, grad


_HEADER = struct.Struct("<4d3q")


def dump_sdf(sdf: SampledSDF, path):
    """Flat little-endian dump: origin, cell size (f64), dims (i64), then row-major f64 values."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(*sdf.grid.origin, sdf.cell_size, *sdf.dims))
        fh.write(np.ascontiguousarray(sdf.values, dtype="<f8").tobytes(order="C"))


def load_sdf(path) -> SampledSDF:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        ox, oy, oz, h, nx, ny, nz = _HEADER.unpack(head)
        vals = np.frombuffer(fh.read(), dtype="<f8").reshape((nx, ny, nz))
    return SampledSDF(GridSpec((ox, oy, oz), h, (nx, ny, nz)), vals.copy())
