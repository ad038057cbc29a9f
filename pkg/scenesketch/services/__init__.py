"""Use-case services: lineage training, matrix assembly and evaluation."""
from scenesketch.services.eval_service import EvalService, merge_reports
from scenesketch.services.fidelity_service import FidelityResult, FidelityService
from scenesketch.services.matrix_service import AbstractionMatrix, MatrixService, lineage_seed
from scenesketch.services.simplify_service import SimplifyResult, SimplifyService

__all__ = [
    "EvalService",
    "merge_reports",
    "FidelityResult",
    "FidelityService",
    "AbstractionMatrix",
    "MatrixService",
    "lineage_seed",
    "SimplifyResult",
    "SimplifyService",
]
