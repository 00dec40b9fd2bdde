"""Explicit reference governor with a CBF safety filter for a planar arm."""

from .arm import ArmModel, JointState
from .barrier import BarrierConfig, BarrierEvaluation, cbf_coefficients, evaluate_barrier
from .dsm import DsmConfig, Obstacle, SafetyThreshold, dsm_arm, dsm_threshold
from .errors import (
    DegenerateGeometryError,
    SafetyBreachError,
    ScenarioError,
    UnsupportedModelError,
)
from .governor import GovernorConfig, ReferenceRate, project_halfspace, reference_rate
from .scenario_io import flagship_scenario, load_scenario
from .sim import (
    AuditReport,
    AuditThresholds,
    BatchSummary,
    Scenario,
    TrajectoryLog,
    batch_run,
    invariant_audit,
    run_scenario,
)
from .softmin import SoftminResult, softmin, softmin_value

__version__ = "0.1.0"


def have_fast_backend() -> bool:
    """True when the compiled kernel was built and imports."""
    from . import _backend

    return _backend.HAVE_FAST


__all__ = [
    "ArmModel",
    "JointState",
    "BarrierConfig",
    "BarrierEvaluation",
    "cbf_coefficients",
    "evaluate_barrier",
    "DsmConfig",
    "Obstacle",
    "SafetyThreshold",
    "dsm_arm",
    "dsm_threshold",
    "DegenerateGeometryError",
    "SafetyBreachError",
    "ScenarioError",
    "UnsupportedModelError",
    "GovernorConfig",
    "ReferenceRate",
    "project_halfspace",
    "reference_rate",
    "flagship_scenario",
    "load_scenario",
    "AuditReport",
    "AuditThresholds",
    "BatchSummary",
    "Scenario",
    "TrajectoryLog",
    "batch_run",
    "invariant_audit",
    "run_scenario",
    "SoftminResult",
    "softmin",
    "softmin_value",
    "have_fast_backend",
    "__version__",
]
