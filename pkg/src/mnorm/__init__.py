"""Norm minimization through logarithmic-budget subproblems."""

from .core import (
    DimensionError, GroupedUniverse, Lp, Max, NoSolution, Ordered, SolveReport, Sum, TopL,
    check_valid, eval_norm, majorization_dominates, validity_factor,
)

__all__ = [
    "DimensionError", "GroupedUniverse", "Lp", "Max", "NoSolution", "Ordered", "SolveReport",
    "Sum", "TopL", "check_valid", "eval_norm", "majorization_dominates", "validity_factor",
]
