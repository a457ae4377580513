"""Exact construction and audit of planar linear forms with prescribed best-approximation behaviour."""
from .construction import ConstructionTrace, StepState, base_case, induction_step, run_construction
from .exact import GAMMA, PSI_THRESHOLD, QuadRadical, QuadReal
from .lattice import IntVec2, RatVec2
from .psi import PsiSpec, PsiValue, psi_eval
from .verify import AuditReport, BestApproxRecord, audit_trace, best_approximations, normalized_error

__all__ = [
    "AuditReport", "BestApproxRecord", "ConstructionTrace", "GAMMA", "IntVec2", "PSI_THRESHOLD",
    "PsiSpec", "PsiValue", "QuadRadical", "QuadReal", "RatVec2", "StepState", "audit_trace",
    "base_case", "best_approximations", "induction_step", "normalized_error", "psi_eval", "run_construction",
]
