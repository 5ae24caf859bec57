"""Symplectic Euler cloth integrator with seams and impulse collisions."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..bvh import TriangleBVH
from ..errors import SimulationError
from ..mesh import TriMesh3
from ..sdf import SampledSDF, sample
from .collisions import cloth_cloth_impulses, mesh_impulses, sdf_impulses
from .forces import bend_energy_grad, seam_bend_forces, stretch_energy_grad
from .model import ClothModel
from .params import SimParams

log = logging.getLogger(__name__)


@dataclass
class SimState:
    positions: np.ndarray
    velocities: np.ndarray
    inv_mass: np.ndarray
    prev_normals: np.ndarray
    substep: int = 0

    @classmethod
    def initial(cls, model: ClothModel, positions, pinned=None):
        X = np.array(positions, dtype=np.float64)
        inv = 1.0 / model.mass
        if pinned is not None:
            inv = inv.copy()
            inv[np.asarray(pinned)] = 0.0
        normals = np.tile([0.0, 1.0, 0.0], (len(X), 1))
        return cls(X, np.zeros_like(X), inv, normals)

    def copy(self):
        return SimState(self.positions.copy(), self.velocities.copy(), self.inv_mass.copy(),
                        self.prev_normals.copy(), self.substep)


@dataclass
class Collider:
    """Frozen obstacles: a collision SDF plus optional detailed meshes."""

    sdf: SampledSDF | None = None
    meshes: list = field(default_factory=list)

    def __post_init__(self):
        self._bvhs = [TriangleBVH.build(m) for m in self.meshes]

    @property
    def mesh_bvhs(self):
        return list(zip(self.meshes, self._bvhs))


def internal_forces(model: ClothModel, X, V):
    """Sum of stretch, bend and seam-bend forces (N, 3) and the elastic energy."""
    Es, gs = stretch_energy_grad(X, model.triangles, model.Minv, model.area, model.k_stretch)
    Eb, gb = bend_energy_grad(X, model.triangles, model.Minv, model.Dinv, model.adj, model.area,
                              model.k_bend, model.rest_curvature)
    F = -(gs + gb)
    Eh = 0.0
    if len(model.hinges):
        Eh = seam_bend_forces(X, V, model.hinges, model.hinge_rest, model.hinge_coef,
                              model.hinge_k, model.hinge_kd, F)
    return F, Es + Eb + Eh


def enforce_seams(model: ClothModel, X, V):
    """Snap seam members to group center + offset; members share the mean velocity."""
    if len(model.seam_members) == 0:
        return
    m, g, off = model.seam_members, model.seam_gid, model.seam_offsets
    n_g = int(g.max()) + 1
    cnt = np.bincount(g, minlength=n_g).astype(float)
    cx = np.stack([np.bincount(g, X[m, k], minlength=n_g) for k in range(3)], axis=1) / cnt[:, None]
    cv = np.stack([np.bincount(g, V[m, k], minlength=n_g) for k in range(3)], axis=1) / cnt[:, None]
    X[m] = cx[g] + off
    V[m] = cv[g]


def kinetic_energy(model: ClothModel, V):
    return 0.5 * float(np.sum(model.mass * np.sum(V * V, axis=1)))


def substep(state: SimState, model: ClothModel, params: SimParams, collider: Collider | None,
            bvh: TriangleBVH | None = None, stats=None, apply_damping=True):
    """Advance one substep in place.

    Order: forces, velocity update, cloth and obstacle impulses, global
    damping, position update, seam projection.
    """
    dt = params.dt
    X, V = state.positions, state.velocities
    coll = params.collision
    F, _ = internal_forces(model, X, V)
    free = state.inv_mass > 0
    V[free] += dt * (F[free] * state.inv_mass[free, None] + np.asarray(params.gravity))
    if params.self_collision and bvh is not None:
        _, n = cloth_cloth_impulses(X, V, state.inv_mass, model.triangles, model.vertex_group, bvh,
                                    dt, model.thickness, coll)
        if stats is not None:
            stats["cloth_contacts"] += n
    inside = None
    if collider is not None and collider.sdf is not None:
        n, pen = sdf_impulses(X, V, state.inv_mass, collider.sdf, dt, coll, state.prev_normals)
        if stats is not None:
            stats["sdf_contacts"] += n
        if collider.meshes:
            inside = sample(collider.sdf, X)[0] < 0
    if collider is not None:
        for mesh, mbvh in collider.mesh_bvhs:
            n = mesh_impulses(X, V, state.inv_mass, mesh, mbvh, dt, model.thickness, coll, inside)
            if stats is not None:
                stats["mesh_contacts"] += n
    if apply_damping and coll.damping_per == "substep":
        V *= 1.0 - coll.velocity_damping
    V[~free] = 0.0
    X += dt * V
    enforce_seams(model, X, V)
    state.substep += 1
    bad = ~np.isfinite(X)
    if bad.any() or np.abs(X).max() > params.max_coordinate:
        raise SimulationError(
            f"cloth blew up at substep {state.substep} "
            f"({'non-finite' if bad.any() else 'coordinate beyond'} {params.max_coordinate:g} cm)",
            substep=state.substep,
        )
    return state


def frame_telemetry(frame, state, model, collider, stats):
    pen = 0.0
    if collider is not None and collider.sdf is not None:
        phi = sample(collider.sdf, state.positions)[0]
        pen = float(max(0.0, -phi.min()))
    return {"frame": frame, "max_penetration": pen,
            "kinetic_energy": kinetic_energy(model, state.velocities),
            "cloth_contacts": stats["cloth_contacts"], "sdf_contacts": stats["sdf_contacts"],
            "mesh_contacts": stats["mesh_contacts"]}


def simulate(state: SimState, model: ClothModel, params: SimParams, collider: Collider | None,
             frames, on_frame=None):
    """Run ``frames`` frames of ``params.substeps`` substeps; returns per-frame telemetry."""
    bvh = None
    if params.self_collision:
        bvh = TriangleBVH.build(TriMesh3(state.positions, model.triangles))
    telemetry = []
    for f in range(frames):
        stats = {"cloth_contacts": 0, "sdf_contacts": 0, "mesh_contacts": 0}
        for _ in range(params.substeps):
            if bvh is not None:
                bvh = bvh.updated(TriMesh3(state.positions, model.triangles))
            try:
                substep(state, model, params, collider, bvh, stats)
            except SimulationError as exc:
                exc.frame = f
                raise
        if params.collision.damping_per == "frame":
            state.velocities *= 1.0 - params.collision.velocity_damping
        t = frame_telemetry(f, state, model, collider, stats)
        telemetry.append(t)
        log.debug("frame %d: %s", f, t)
        if on_frame is not None:
            on_frame(f, state)
    return telemetry
