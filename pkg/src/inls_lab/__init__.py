"""Numerical laboratory for the radial focusing equation
i u_t + Delta u + |x|^{-b}|u|^{p-1}u = 0 in real dimension N > 2."""
from .exponents import ModelParams, critical_index, exponent_family, intercritical_check
from .grid import RadialField, RadialGrid, build_grid
from .groundstate import GroundState, solve_ground_state
from .evolve import EvolutionConfig, TrajectoryRecord, linear_propagate, run
from .classify import Criteria, Verdict, classify_trajectory, threshold_sweep

__all__ = [
    "ModelParams", "critical_index", "exponent_family", "intercritical_check",
    "RadialField", "RadialGrid", "build_grid", "GroundState", "solve_ground_state",
    "EvolutionConfig", "TrajectoryRecord", "linear_propagate", "run",
    "Criteria", "Verdict", "classify_trajectory", "threshold_sweep",
]
__version__ = "0.1.0"
