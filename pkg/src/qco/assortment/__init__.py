"""Assortment optimization: exact enumeration, nested heuristics, approximation schemes."""

from .base import AssortmentSolution, brute_force, optimality_condition, revenue_ordered, subset_revenues
from .fptas import fptas_hetero, fptas_homog

__all__ = [
    "AssortmentSolution", "brute_force", "optimality_condition", "revenue_ordered",
    "subset_revenues", "fptas_homog", "fptas_hetero",
]

from .gadget import GadgetInstance, GadgetReport, gadget_build, gadget_verify, partition_equivalence  # noqa: E402

__all__ += ["GadgetInstance", "GadgetReport", "gadget_build", "gadget_verify", "partition_equivalence"]
