from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .._validation import check_is_fitted, check_points
from ..bvh import TriangleBVH, closest_points
from ..errors import TransferStalledError, ValidationError
from ..garment import GarmentSheet
from ..mesh import TriMesh3
from .config import TransferConfig
from .fem import assemble_system, build_boundary_quadrature
from .grid import activate_band, sample_displacement
from .solver import fixed_point_solve

log = logging.getLogger(__name__)


@dataclass
class TransferStage:
    grid: object
    displacement: np.ndarray
    pressure: np.ndarray


@dataclass
class TransferReport:
    outer_iterations: int = 0
    gap_history: list = field(default_factory=list)
    fixed_point_iterations: list = field(default_factory=list)
    cg_iterations: list = field(default_factory=list)
    active_cells: list = field(default_factory=list)
    boundary_samples: list = field(default_factory=list)
    band_width: float = 0.0
    clamped_points: int = 0
    converged: bool = False

    def to_dict(self):
        return asdict(self)


class GarmentTransfer(TransformerMixin, BaseEstimator):
    """Carry points from around a source body to around a target body.

    ``fit`` solves a sequence of displacement fields, each driven by the
    remaining body mismatch; ``transform`` advects points through them.
    """

    def __init__(self, cell_size=2.0, band_width=12.0, viscosity=1.0, compliance=0.01,
                 penalty=None, quadrature_order=2, cg_tol=1e-6, cg_max_iter=5000, fp_tol=1e-4,
                 fp_max_iter=20, gap_threshold=0.5, max_restarts=5):
        self.cell_size = cell_size
        self.band_width = band_width
        self.viscosity = viscosity
        self.compliance = compliance
        self.penalty = penalty
        self.quadrature_order = quadrature_order
        self.cg_tol = cg_tol
        self.cg_max_iter = cg_max_iter
        self.fp_tol = fp_tol
        self.fp_max_iter = fp_max_iter
        self.gap_threshold = gap_threshold
        self.max_restarts = max_restarts

    @classmethod
    def from_config(cls, config: TransferConfig):
        return cls(**config.to_dict())

    def config(self) -> TransferConfig:
        return TransferConfig(**self.get_params())

    def fit(self, source: TriMesh3, target, points=None):
        """Solve for the stage fields.

        ``target`` is a mesh or an array of target positions paired one to one
        with the source vertices. ``points`` (optional) are the positions that
        will later be transformed; the band is widened to contain them.
        """
        cfg = self.config()
        tgt = target.positions if isinstance(target, TriMesh3) else np.asarray(target, float)
        tgt = check_points(tgt, 3, "target")
        if tgt.shape != source.positions.shape:
            raise ValidationError(
                f"target has {len(tgt)} vertices, source has {source.n_vertices}; "
                "bodies must share topology"
            )
        band = float(cfg.band_width)
        if points is not None:
            pts = check_points(points, 3, "points", allow_empty=True)
            if len(pts):
                _, _, _, d = closest_points(pts, source)
                need = float(d.max()) + 2.0 * cfg.cell_size
                if need > band:
                    log.warning("widening transfer band from %.3g to %.3g cm to contain the garment",
                                band, need)
                    band = need
        report = TransferReport(band_width=band)
        stages = []
        body = source
        gap = float(np.linalg.norm(tgt - body.positions, axis=1).max())
        report.gap_history.append(gap)
        for outer in range(cfg.max_restarts + 1):
            if gap <= cfg.gap_threshold and outer > 0:
                break
            bvh = TriangleBVH.build(body)
            grid = activate_band(body, cfg.cell_size, band, bvh)
            quad = build_boundary_quadrature(grid, body, tgt, cfg.quadrature_order, bvh)
            system = assemble_system(grid, quad, cfg.viscosity, cfg.compliance, cfg.penalty_weight)
            u, p, info = fixed_point_solve(grid, system, cfg.fp_tol, cfg.fp_max_iter, cfg.cg_tol,
                                           cfg.cg_max_iter)
            stages.append(TransferStage(grid, u, p))
            report.fixed_point_iterations.append(info.iterations)
            report.cg_iterations.append(info.cg_iterations)
            report.active_cells.append(grid.n_cells)
            report.boundary_samples.append(len(quad))
            report.outer_iterations = outer + 1
            disp, _ = sample_displacement(grid, u, body.positions)
            body = body.with_positions(body.positions + disp)
            new_gap = float(np.linalg.norm(tgt - body.positions, axis=1).max())
            report.gap_history.append(new_gap)
            log.info("transfer stage %d: gap %.4g -> %.4g cm", outer + 1, gap, new_gap)
            if new_gap >= gap and gap > cfg.gap_threshold:
                raise TransferStalledError(
                    f"body gap did not shrink ({gap:.4g} -> {new_gap:.4g} cm)",
                    list(report.gap_history),
                )
            gap = new_gap
        report.converged = gap <= cfg.gap_threshold
        if not report.converged:
            log.warning("transfer ended with body gap %.4g cm above threshold %.4g",
                        gap, cfg.gap_threshold)
        self.stages_ = stages
        self.displaced_body_ = body
        self.report_ = report
        return self

    def transform(self, X):
        check_is_fitted(self, ["stages_"])
        P = check_points(X, 3, "X", allow_empty=True).copy()
        clamped = 0
        for st in self.stages_:
            d, n_out = sample_displacement(st.grid, st.displacement, P)
            clamped = max(clamped, n_out)
            P += d
        if clamped:
            log.warning("%d point(s) lay outside the transfer band; used nearest node", clamped)
        self.report_.clamped_points = max(self.report_.clamped_points, clamped)
        return P


def transfer_garment(garment: GarmentSheet, source: TriMesh3, target: TriMesh3,
                     config: TransferConfig | None = None):
    """Transfer one garment; returns (new garment, fitted transfer)."""
    est = GarmentTransfer.from_config(config or TransferConfig())
    est.fit(source, target, points=garment.mesh3d.positions)
    moved = est.transform(garment.mesh3d.positions)
    return garment.with_positions(moved), est
