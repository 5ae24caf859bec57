"""Layer-by-layer draping against a growing collision SDF."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator

from .cloth.model import ClothModel
from .cloth.params import CollisionParams, SimParams
from .cloth.sim import Collider, SimState, simulate
from .errors import ConfigurationError, SimulationError
from .garment import GarmentSheet
from .mesh import TriMesh3
from .sdf import DEFAULT_WINDING_THRESHOLD, GridSpec, SampledSDF, build_sdf, sample, sdf_union

log = logging.getLogger(__name__)


@dataclass
class LayerStats:
    garment: str
    layer: int
    order: int
    frames: int
    seconds: float
    max_penetration: float
    penetrating_fraction: float
    final_kinetic_energy: float
    cloth_contacts: int
    sdf_contacts: int
    warning: str | None = None
    telemetry: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


@dataclass
class DrapeResult:
    garments: list
    detailed: list
    order: list
    layers: list
    sdf: SampledSDF

    @property
    def warnings(self):
        return [s.warning for s in self.layers if s.warning]


def layer_order(garments):
    """Indices sorted by layer; ties keep input order."""
    return sorted(range(len(garments)), key=lambda i: (int(garments[i].layer), i))


def outfit_grid(meshes, resolution=128, margin=5.0, cell_size=None):
    lo = np.min([m.positions.min(axis=0) for m in meshes], axis=0)
    hi = np.max([m.positions.max(axis=0) for m in meshes], axis=0)
    return GridSpec.covering(lo, hi, resolution, margin, cell_size)


def union_all(fields, eps_sdf, mode="per_operand", grid=None):
    """Fold ``fields`` into one expanded collision SDF (the empty fold is +inf everywhere)."""
    if not fields and grid is None:
        raise ConfigurationError("need at least one field or a grid")
    total = SampledSDF.empty(grid or fields[0].grid)
    for f in fields:
        total = sdf_union(total, f, eps_sdf, mode)
    return total


def progressive_drape(garments, body: TriMesh3 | None, params: SimParams | None = None, frames=6,
                      grid: GridSpec | None = None, resolution=128, margin=5.0,
                      winding_threshold=DEFAULT_WINDING_THRESHOLD, union_mode="per_operand",
                      colliders=(), details=None, rest_curvature="flat", mesh_colliders=True,
                      on_frame=None, on_sdf=None, final_union=False) -> DrapeResult:
    """Drape ``garments`` one at a time in layer order.

    Each garment is simulated for ``frames`` frames against the union of the
    body SDF, any extra ``colliders`` (SDFs) and the SDFs of every garment
    draped before it; it is then frozen. ``details`` optionally maps
    ``(index, draped proxy)`` to the detailed garment used for the lower-layer
    SDF. ``on_frame(index, frame, positions)`` and ``on_sdf(index, sdf)``
    are debug hooks. The returned field includes the last garment only
    when ``final_union`` is set.
    """
    params = params or SimParams()
    eps = params.collision.eps_sdf
    garments = list(garments)
    order = layer_order(garments)
    if grid is None:
        meshes = [g.mesh3d for g in garments] + ([body] if body is not None else [])
        if not meshes:
            raise ConfigurationError("nothing to drape and no grid given")
        grid = outfit_grid(meshes, resolution, margin)
    fields = list(colliders)
    if body is not None:
        fields.insert(0, build_sdf(body, grid, winding_threshold))
    s_total = union_all(fields, eps, union_mode, grid)
    draped = [None] * len(garments)
    detailed = [None] * len(garments)
    frozen = []
    layers = []
    for rank, i in enumerate(order):
        g = garments[i]
        t0 = time.perf_counter()
        if on_sdf is not None:
            on_sdf(i, s_total)
        model = ClothModel.from_garments([g], rest_curvature)
        state = SimState.initial(model, g.mesh3d.positions)
        collider = Collider(s_total, list(frozen) if mesh_colliders else [])
        hook = None if on_frame is None else (lambda f, st, i=i: on_frame(i, f, st.positions))
        try:
            tel = simulate(state, model, params, collider, frames, hook)
        except SimulationError as exc:
            exc.layer = int(g.layer)
            raise SimulationError(f"layer {g.layer} garment '{g.name}': {exc}",
                                  substep=exc.substep, layer=int(g.layer)) from exc
        out = g.with_positions(state.positions)
        phi = sample(s_total, state.positions)[0] if np.isfinite(s_total.values).any() \
            else np.full(len(state.positions), np.inf)
        pen = float(max(0.0, -phi.min())) if len(phi) else 0.0
        warning = None
        if pen > eps:
            warning = (f"garment '{g.name}' (layer {g.layer}) ends {pen:.3g} cm inside the "
                       f"collision field (threshold {eps:g})")
            log.warning(warning)
        det = details(i, out) if details is not None else out
        draped[i] = out
        detailed[i] = det
        frozen.append(det.mesh3d)
        if rank < len(order) - 1 or final_union:
            s_total = sdf_union(s_total, build_sdf(det.mesh3d, grid, winding_threshold), eps,
                                union_mode)
        last = tel[-1] if tel else {}
        layers.append(LayerStats(
            g.name, int(g.layer), rank, frames, time.perf_counter() - t0, pen,
            float(np.mean(phi < 0)) if len(phi) else 0.0,
            float(last.get("kinetic_energy", 0.0)),
            int(sum(t["cloth_contacts"] for t in tel)), int(sum(t["sdf_contacts"] for t in tel)),
            warning, tel))
        log.info("draped layer %d '%s' in %.2f s (max penetration %.3g cm)", g.layer, g.name,
                 layers[-1].seconds, pen)
    return DrapeResult(draped, detailed, order, layers, s_total)


class ProgressiveDraper(BaseEstimator):
    """Estimator wrapper around :func:`progressive_drape`; results land in ``result_``."""

    def __init__(self, frames=6, substeps=16, frame_dt=1.0 / 60.0, resolution=128, margin=5.0,
                 eps_sdf=0.2, union_mode="per_operand", winding_threshold=DEFAULT_WINDING_THRESHOLD,
                 self_collision=True, rest_curvature="flat", mesh_colliders=True):
        self.frames = frames
        self.substeps = substeps
        self.frame_dt = frame_dt
        self.resolution = resolution
        self.margin = margin
        self.eps_sdf = eps_sdf
        self.union_mode = union_mode
        self.winding_threshold = winding_threshold
        self.self_collision = self_collision
        self.rest_curvature = rest_curvature
        self.mesh_colliders = mesh_colliders

    def sim_params(self, collision: CollisionParams | None = None):
        coll = replace(collision or CollisionParams(), eps_sdf=self.eps_sdf)
        return SimParams(frame_dt=self.frame_dt, substeps=self.substeps, collision=coll,
                         self_collision=self.self_collision)

    def fit(self, garments, body=None, details=None, colliders=(), grid=None, **hooks):
        if self.frames < 0 or self.substeps < 1:
            raise ConfigurationError("frames must be >= 0 and substeps >= 1")
        self.result_ = progressive_drape(
            garments, body, self.sim_params(), self.frames, grid, self.resolution, self.margin,
            self.winding_threshold, self.union_mode, colliders, details, self.rest_curvature,
            self.mesh_colliders, **hooks)
        return self

    @property
    def draped_(self) -> list[GarmentSheet]:
        return self.result_.garments
