from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..errors import ConfigurationError


@dataclass(frozen=True)
class TransferConfig:
    """Settings for the volumetric displacement transfer.

    ``penalty`` of ``None`` means ``1e3 * viscosity / cell_size``.
    """

    cell_size: float = 2.0
    band_width: float = 12.0
    viscosity: float = 1.0
    compliance: float = 0.01
    penalty: float | None = None
    quadrature_order: int = 2
    cg_tol: float = 1e-6
    cg_max_iter: int = 5000
    fp_tol: float = 1e-4
    fp_max_iter: int = 20
    gap_threshold: float = 0.5
    max_restarts: int = 5

    def __post_init__(self):
        for name in ("cell_size", "band_width", "viscosity", "compliance", "cg_tol",
                     "fp_tol", "gap_threshold"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"transfer {name} must be > 0")
        if self.penalty is not None and not self.penalty > 0:
            raise ConfigurationError("transfer penalty must be > 0")
        if self.quadrature_order not in (1, 2, 3):
            raise ConfigurationError("quadrature_order must be 1, 2 or 3")
        if self.cg_max_iter < 1 or self.fp_max_iter < 1 or self.max_restarts < 0:
            raise ConfigurationError("iteration limits must be positive")

    @property
    def penalty_weight(self):
        if self.penalty is not None:
            return float(self.penalty)
        return 1e3 * self.viscosity / self.cell_size

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        bad = set(d) - known
        if bad:
            raise ConfigurationError(f"unknown transfer keys: {sorted(bad)}")
        return cls(**d)
