from tvsim.diagnostics.conditions import ConditionReport, check_training_conditions
from tvsim.diagnostics.flows import FlowCheck, flow_bound, flow_envelope, sample_admissible, verify_flow, verify_flow_batch
from tvsim.diagnostics.losses import CosineReport, EvalSummary, cosine_summary, evaluate_samples, h0_cosines, zero_one_loss
from tvsim.diagnostics.probes import memorization_ratio, probe_summary, projection_probe
from tvsim.diagnostics.trajectory import TrajectoryReport, trajectory_assertions

__all__ = [
    "ConditionReport",
    "CosineReport",
    "EvalSummary",
    "FlowCheck",
    "TrajectoryReport",
    "check_training_conditions",
    "cosine_summary",
    "evaluate_samples",
    "flow_bound",
    "flow_envelope",
    "h0_cosines",
    "memorization_ratio",
    "probe_summary",
    "projection_probe",
    "sample_admissible",
    "trajectory_assertions",
    "verify_flow",
    "verify_flow_batch",
    "zero_one_loss",
]
