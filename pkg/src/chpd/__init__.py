"""Combined heat-and-power dispatch via conic relaxation and adaptive partitioning."""
from .case import Case, bundled_case, load_case, validate_case
from .conic import ConicProgram, LinExpr, Solution
from .solvers import solve_continuous, solve_misocp

__all__ = [
    "Case", "ConicProgram", "LinExpr", "Solution", "bundled_case", "load_case",
    "solve_continuous", "solve_misocp", "validate_case",
]
