"""Pipeline configuration: one nested document with per-stage sections."""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, fields, replace

from .cloth.params import CollisionParams, SimParams
from .errors import ConfigurationError
from .pattern.estimator import PatternConfig
from .transfer.config import TransferConfig


@dataclass(frozen=True)
class SimConfig:
    frames: int = 6
    substeps: int = 16
    frame_dt: float = 1.0 / 60.0
    self_collision: bool = True
    rest_curvature: str = "flat"
    mesh_colliders: bool = True
    collision: CollisionParams = field(default_factory=CollisionParams)

    def __post_init__(self):
        if self.frames < 0 or self.substeps < 1 or self.frame_dt <= 0:
            raise ConfigurationError("sim needs frames >= 0, substeps >= 1 and frame_dt > 0")
        if self.rest_curvature not in ("flat", "initial"):
            raise ConfigurationError("rest_curvature must be 'flat' or 'initial'")

    def sim_params(self):
        return SimParams(frame_dt=self.frame_dt, substeps=self.substeps, collision=self.collision,
                         self_collision=self.self_collision)


@dataclass(frozen=True)
class SdfConfig:
    resolution: int = 128
    margin: float = 5.0
    winding_threshold: float = 0.25
    union_mode: str = "per_operand"

    def __post_init__(self):
        if self.resolution < 8 or self.margin < 0:
            raise ConfigurationError("sdf resolution must be >= 8 and margin >= 0")
        if self.union_mode not in ("per_operand", "per_union"):
            raise ConfigurationError("union_mode must be 'per_operand' or 'per_union'")


@dataclass(frozen=True)
class RigConfig:
    method: str = "normal"
    max_ray: float = 15.0
    smoothing_rounds: int = 3
    smoothing_factor: float = 0.5
    max_influences: int = 8

    def __post_init__(self):
        if self.method not in ("normal", "proximal"):
            raise ConfigurationError("rig method must be 'normal' or 'proximal'")
        if self.max_ray <= 0 or self.smoothing_rounds < 0 or not 0 <= self.smoothing_factor <= 1:
            raise ConfigurationError("rig needs max_ray > 0, rounds >= 0, factor in [0, 1]")


@dataclass(frozen=True)
class PipelineConfig:
    transfer: TransferConfig = field(default_factory=TransferConfig)
    pattern: PatternConfig = field(default_factory=PatternConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    sdf: SdfConfig = field(default_factory=SdfConfig)
    rig: RigConfig = field(default_factory=RigConfig)
    optimize_pattern: bool = True
    transfer_rig: bool = True

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls().merged(d)

    def merged(self, overrides):
        """Copy with ``overrides`` (a possibly partial nested dict) applied."""
        return _merge(self, overrides or {}, "config")

    def with_frames(self, frames):
        return replace(self, sim=replace(self.sim, frames=int(frames)))


def _merge(obj, overrides, where):
    if not isinstance(overrides, dict):
        raise ConfigurationError(f"{where} must be an object")
    known = {f.name: f for f in fields(obj)}
    unknown = sorted(set(overrides) - set(known))
    if unknown:
        raise ConfigurationError(f"unknown keys in {where}: {unknown}")
    changes = {}
    for k, v in overrides.items():
        cur = getattr(obj, k)
        if hasattr(cur, "__dataclass_fields__"):
            changes[k] = _merge(cur, v, f"{where}.{k}")
        else:
            changes[k] = copy.deepcopy(v)
    try:
        return replace(obj, **changes)
    except TypeError as exc:
        raise ConfigurationError(f"bad value in {where}: {exc}") from exc
