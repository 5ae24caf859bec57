"""Material and collision parameters (cm / g / s)."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

from ..errors import ConfigurationError


@dataclass(frozen=True)
class MaterialParams:
    """Per-panel fabric constants along warp, weft and shear."""

    k_warp: float = 2.0e4
    k_weft: float = 2.0e4
    k_shear_stretch: float = 5.0e3
    k_warp_bend: float = 5.0
    k_weft_bend: float = 5.0
    k_shear_bend: float = 2.0
    density: float = 0.02
    thickness: float = 0.3
    seam_bend_stiffness: float = 5.0
    seam_bend_damping: float = 0.05

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v < 0:
                raise ConfigurationError(f"material {f.name} must be >= 0, got {v}")
        if self.density <= 0:
            raise ConfigurationError("material density must be > 0")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown material keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class CollisionParams:
    """Contact response constants (impulse spring, damper, friction clamp, SDF expansion)."""

    force_coefficient: float = 2.5e6
    damping_coefficient: float = 25.0
    friction_coefficient: float = 25.0
    eps_sdf: float = 0.2
    velocity_damping: float = 0.9
    damping_per: str = "substep"

    def __post_init__(self):
        for name in ("force_coefficient", "damping_coefficient", "friction_coefficient", "eps_sdf"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0")
        if not 0.0 <= self.velocity_damping <= 1.0:
            raise ConfigurationError("velocity_damping must lie in [0, 1]")
        if self.damping_per not in ("substep", "frame"):
            raise ConfigurationError("damping_per must be 'substep' or 'frame'")


@dataclass(frozen=True)
class SimParams:
    """Integrator settings. ``velocity_damping`` is the fraction of velocity removed."""

    frame_dt: float = 1.0 / 60.0
    substeps: int = 16
    gravity: tuple = (0.0, -981.0, 0.0)
    collision: CollisionParams = field(default_factory=CollisionParams)
    self_collision: bool = True
    max_coordinate: float = 1.0e4

    @property
    def dt(self):
        return self.frame_dt / self.substeps
