"""Re-optimization of 2D sewing patterns after a 3D garment transfer."""

from .admm import AdmmState, admm_optimize
from .energy import base_energy, base_quadratic, edge_neighborhoods, edge_scale_and_energy
from .estimator import PatternConfig, PatternOptimizer, PatternReport
from .frames import TangentBinding, bind_tangents, build_target_frames, polar_3x2
from .tidy import dirichlet_tidy

__all__ = ["AdmmState", "PatternConfig", "PatternOptimizer", "PatternReport", "TangentBinding",
           "admm_optimize", "base_energy", "base_quadratic", "bind_tangents",
           "build_target_frames", "dirichlet_tidy", "edge_neighborhoods",
           "edge_scale_and_energy", "polar_3x2"]
