"""Core-based reviewer assignment: CoBRA, welfare baselines and core audits."""

from .audit import AuditReport, DeviationWitness, exact_audit, heuristic_audit, verify_witness
from .baselines import assign_max_usw, assign_maxmin_esw
from .cobra import run_cobra
from .model import Assignment, InputError, Instance, compute_utilities, instance_from_scores, validate_assignment

__all__ = [
    "Assignment",
    "AuditReport",
    "DeviationWitness",
    "InputError",
    "Instance",
    "assign_max_usw",
    "assign_maxmin_esw",
    "compute_utilities",
    "exact_audit",
    "heuristic_audit",
    "instance_from_scores",
    "run_cobra",
    "validate_assignment",
    "verify_witness",
]
