"""Garment sheets: a 3D mesh paired with its sewing-pattern layout."""

from __future__ import annotations

from dataclasses import dataclass, field, replace


from .cloth.params import MaterialParams
from .errors import ValidationError
from .mesh import PatternLayout2D, TriMesh3, check_paired
from .seams import SeamSpec, build_seam_groups


@dataclass(frozen=True, eq=False)
class GarmentSheet:
    mesh3d: TriMesh3
    layout2d: PatternLayout2D
    seams: SeamSpec
    material: MaterialParams | None = None
    layer: int = 0
    panel_semantics: dict = field(default_factory=dict)
    name: str = "garment"

    def __post_init__(self):
        check_paired(self.mesh3d, self.layout2d)
        if int(self.layer) < 0:
            raise ValidationError(f"garment '{self.name}': layer must be >= 0")
        if self.material is None:
            object.__setattr__(self, "material", MaterialParams())
        sem = {int(k): str(v) for k, v in dict(self.panel_semantics).items()}
        for p in self.layout2d.panels:
            sem.setdefault(int(p), "body")
        object.__setattr__(self, "panel_semantics", sem)

    @property
    def n_vertices(self):
        return self.mesh3d.n_vertices

    def with_positions(self, positions):
        return replace(self, mesh3d=self.mesh3d.with_positions(positions))

    def with_layout(self, positions2d):
        return replace(self, layout2d=self.layout2d.with_positions(positions2d))

    def reseamed(self, positions=None):
        """Rebuild seam offsets from ``positions`` (defaults to the current 3D mesh)."""
        pos = self.mesh3d.positions if positions is None else positions
        return replace(self, seams=build_seam_groups(self.seams.pairs, pos))
