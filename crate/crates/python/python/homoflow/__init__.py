"""Oscillating transport fields, characteristic solvers and homogenization diagnostics."""

from ._homoflow import (
    Family,
    Solution,
    System,
    check,
    cofactor_matrix,
    cross_product,
    homogenize,
    rot_perp,
    simulate,
    sweep,
)

__all__ = [
    "Family",
    "Solution",
    "System",
    "check",
    "cofactor_matrix",
    "cross_product",
    "homogenize",
    "rot_perp",
    "simulate",
    "sweep",
]
