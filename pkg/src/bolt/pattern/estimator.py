from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .._validation import check_is_fitted, check_points
from ..errors import ConfigurationError, PatternError
from ..garment import GarmentSheet
from ..mesh import signed_areas_2d
from .admm import admm_optimize
from .energy import base_quadratic, edge_neighborhoods
from .frames import bind_tangents, build_target_frames
from .tidy import dirichlet_tidy

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PatternConfig:
    mode: str = "preserve_fit"
    epsilon: float = 1e-8
    admm_penalty: float = 10.0
    edge_weight: float = 1000.0
    max_iter: int = 500
    tol: float = 1e-6
    stall_window: int = 50
    seam_lines: bool = True
    tidy: bool = True

    def __post_init__(self):
        if self.mode not in ("loose", "preserve_fit"):
            raise ConfigurationError(f"pattern mode must be 'loose' or 'preserve_fit', not {self.mode!r}")
        for name in ("epsilon", "admm_penalty", "edge_weight", "tol"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"pattern {name} must be > 0")
        if self.max_iter < 1:
            raise ConfigurationError("pattern max_iter must be >= 1")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigurationError(f"bad pattern config: {exc}") from exc


@dataclass
class PatternReport:
    iterations: int = 0
    converged: bool = False
    primal_history: list = field(default_factory=list)
    dual_history: list = field(default_factory=list)
    seam_length_deltas: list = field(default_factory=list)
    max_seam_length_delta: float = 0.0
    min_signed_area: float = 0.0

    def to_dict(self):
        return asdict(self)


def seam_polylines(garment: GarmentSheet):
    """Pairs of sewn 2D polylines as lists of edges ``[(a0, a1)], [(b0, b1)]``.

    Seam pair (a, b) and (a', b') form sewn edges a-a' and b-b' when both are
    edges of the layout.
    """
    from ..mesh import unique_edges

    edges, _ = unique_edges(garment.layout2d.triangles)
    edge_set = set(map(tuple, edges.tolist()))
    pairs = garment.seams.pairs
    out = []
    for i in range(len(pairs)):
        for j in range(i + 1, len(pairs)):
            a0, b0 = pairs[i]
            a1, b1 = pairs[j]
            ea = tuple(sorted((int(a0), int(a1))))
            eb = tuple(sorted((int(b0), int(b1))))
            if ea in edge_set and eb in edge_set and ea != eb:
                out.append((ea, eb))
    return out


def seam_length_deltas(garment: GarmentSheet, x):
    """Relative length difference of each sewn side pair, grouped into connected seams."""
    sewn = seam_polylines(garment)
    if not sewn:
        return []
    # group sewn edge pairs into seams by shared vertices on side a
    parent = list(range(len(sewn)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(sewn)):
        for j in range(i + 1, len(sewn)):
            if set(sewn[i][0]) & set(sewn[j][0]):
                parent[find(i)] = find(j)
    groups = {}
    for i in range(len(sewn)):
        groups.setdefault(find(i), []).append(sewn[i])
    deltas = []
    for members in groups.values():
        la = sum(np.linalg.norm(x[a] - x[b]) for (a, b), _ in members)
        lb = sum(np.linalg.norm(x[a] - x[b]) for _, (a, b) in members)
        deltas.append(float(abs(la - lb) / max(la, lb)))
    return deltas


class PatternOptimizer(TransformerMixin, BaseEstimator):
    """Re-cut the 2D pattern of a garment to fit its transferred 3D shape.

    ``fit`` binds tangents on the source garment; ``transform`` takes target
    3D positions and returns the optimized (N, 2) layout.
    """

    def __init__(self, mode="preserve_fit", epsilon=1e-8, admm_penalty=10.0, edge_weight=1000.0,
                 max_iter=500, tol=1e-6, stall_window=50, seam_lines=True, tidy=True):
        self.mode = mode
        self.epsilon = epsilon
        self.admm_penalty = admm_penalty
        self.edge_weight = edge_weight
        self.max_iter = max_iter
        self.tol = tol
        self.stall_window = stall_window
        self.seam_lines = seam_lines
        self.tidy = tidy

    @classmethod
    def from_config(cls, config: PatternConfig):
        return cls(**config.to_dict())

    def fit(self, garment: GarmentSheet, y=None):
        PatternConfig(**self.get_params())
        self.garment_ = garment
        self.binding_ = bind_tangents(garment.layout2d, garment.mesh3d)
        self.neighborhoods_ = edge_neighborhoods(garment.layout2d, garment.seams, self.seam_lines)
        return self

    def target_binding(self, target_positions):
        return build_target_frames(self.binding_, self.garment_.mesh3d.positions,
                                   target_positions, self.mode)[1]

    def optimize(self, B, x0=None):
        """Run the optimization for an explicit per-triangle frame binding ``B`` (T, 2, 2)."""
        check_is_fitted(self, ["binding_"])
        layout = self.garment_.layout2d
        quad = base_quadratic(layout, B, self.epsilon)
        start = layout.positions2d if x0 is None else check_points(x0, 2, "x0")
        state = admm_optimize(quad, self.neighborhoods_, start, self.edge_weight,
                              self.admm_penalty, self.max_iter, self.tol, self.stall_window)
        x = state.x
        if self.tidy and len(self.neighborhoods_):
            x = dirichlet_tidy(x, self.neighborhoods_.vertex, layout.positions2d, layout.triangles)
        sa = signed_areas_2d(x, layout.triangles)
        flipped = np.flatnonzero(sa <= 0)
        if flipped.size:
            raise PatternError(f"{flipped.size} pattern triangle(s) flipped during optimization",
                               flipped.tolist())
        deltas = seam_length_deltas(self.garment_, x)
        self.report_ = PatternReport(state.iterations, state.converged, state.primal_history,
                                     state.dual_history, deltas, max(deltas, default=0.0),
                                     float(sa.min()) if len(sa) else 0.0)
        if not state.converged:
            log.warning("pattern ADMM stopped after %d iterations without converging",
                        state.iterations)
        return x

    def transform(self, target_positions, x0=None):
        check_is_fitted(self, ["binding_"])
        P = check_points(target_positions, 3, "target_positions")
        if len(P) != self.garment_.n_vertices:
            raise ConfigurationError("target positions do not match the fitted garment")
        return self.optimize(self.target_binding(P), x0)


def pattern_svg(layout_before, layout_after, triangles, panel_id, path, scale=4.0):
    """Panel outlines before (grey) and after (black) optimization."""
    from ..mesh import boundary_edges

    be = boundary_edges(np.asarray(triangles))
    pts = np.vstack([layout_before, layout_after])
    lo = pts.min(axis=0) - 2.0
    hi = pts.max(axis=0) + 2.0
    w, h = (hi - lo) * scale

    def line(p, q, color):
        a = (p - lo) * scale
        b = (q - lo) * scale
        return (f'<line x1="{a[0]:.3f}" y1="{h - a[1]:.3f}" x2="{b[0]:.3f}" y2="{h - b[1]:.3f}" '
                f'stroke="{color}" stroke-width="1"/>')

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1f}" height="{h:.1f}">']
    for pid in np.unique(panel_id):
        out.append(f'<g id="panel-{int(pid)}">')
        for a, b in be:
            if panel_id[a] != pid:
                continue
            out.append(line(layout_before[a], layout_before[b], "#999999"))
            out.append(line(layout_after[a], layout_after[b], "#000000"))
        out.append("</g>")
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def write_pattern_report(report: PatternReport, path):
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
