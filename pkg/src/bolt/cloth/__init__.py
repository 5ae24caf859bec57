"""Panel-based cloth simulation: elastic forces, seams and impulse collisions."""

from .model import ClothModel
from .params import CollisionParams, MaterialParams, SimParams
from .sim import Collider, SimState, enforce_seams, internal_forces, kinetic_energy, simulate, substep

__all__ = ["ClothModel", "Collider", "CollisionParams", "MaterialParams", "SimParams", "SimState",
           "enforce_seams", "internal_forces", "kinetic_energy", "simulate", "substep"]
