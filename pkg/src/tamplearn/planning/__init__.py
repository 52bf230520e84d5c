from .grounding import GroundOperator, GroundTask, ground_operators
from .kernels import BIG, backend_name, hadd_kernel
from .refine import SamplerBudget, refine
from .search import Skeleton, make_heuristic, skeleton_search
from .solve import PlannerConfig, SolveStats, solve, solve_no_operators

__all__ = [
    "BIG",
    "GroundOperator",
    "GroundTask",
    "PlannerConfig",
    "SamplerBudget",
    "Skeleton",
    "SolveStats",
    "backend_name",
    "ground_operators",
    "hadd_kernel",
    "make_heuristic",
    "refine",
    "skeleton_search",
    "solve",
    "solve_no_operators",
]
