"""Sufficient controllability criteria for bilinear systems projected to the unit sphere."""

from .documents import ParseError, ValidationError, parse_system, serialize_system
from .dynamics import (ControlSchedule, flow_on_sphere, integrate_projected, monte_carlo_connect,
                       simulate_schedule)
from .geometry import build_cell_complex
from .linalg3 import eigen_decompose, solve_cubic
from .reachability import compute_closure, decide, decide_theorem_a, decide_theorem_b, decide_theorem_c
from .replay import replay_step, validate_verdict
from .system import BilinearSystem, Box, FiniteSet, build_subsystem, subsystem_from_matrices

__version__ = "0.1.0"

__all__ = [
    "BilinearSystem", "Box", "ControlSchedule", "FiniteSet", "ParseError", "ValidationError",
    "build_cell_complex", "build_subsystem", "compute_closure", "decide", "decide_theorem_a",
    "decide_theorem_b", "decide_theorem_c", "eigen_decompose", "flow_on_sphere",
    "integrate_projected", "monte_carlo_connect", "parse_system", "replay_step",
    "serialize_system", "simulate_schedule", "solve_cubic", "subsystem_from_matrices",
    "validate_verdict",
]
