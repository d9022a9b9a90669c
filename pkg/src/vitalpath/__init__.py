"""Treatment-graph navigation with live vital-sign fusion.

The library walks expert-defined emergency protocols node by node,
joining each step's value requirements against a timestamped vital
store, automating only unambiguous decisions (always undoable, always
audited), and raising debounced threshold alarms for operator review.
"""
from .alarms import (
    Alarm,
    AlarmMonitor,
    AlarmState,
    AlarmThreshold,
    OperatorVerdict,
    VerdictDecision,
    load_thresholds,
    parse_thresholds,
)
from .dosage import (
    DosageBranch,
    DosageResult,
    DosageRule,
    MissingDependencyError,
    compute_dosage,
    load_dosage_rules,
)
from .graph import (
    GraphKind,
    NodeKind,
    Purpose,
    TreatmentEdge,
    TreatmentGraph,
    TreatmentNode,
    VitalRequirement,
    load_graph_dir,
    load_graph_file,
    parse_graph,
    serialize_graph,
)
from .navigator import (
    AuditEvent,
    AuditKind,
    RangeState,
    RangeStatus,
    ResolvedVital,
    Session,
    StepView,
    evaluate_range,
    start_session,
)
from .runtime import ManualClock, MonotonicClock, Runtime
from .service import Service, ServiceConfig, build_runtime, load_config, serve
from .sessionlog import ReplayedState, SessionLog, state_from_live, state_from_records
from .stats import StatsReport, vital_occurrence_stats
from .store import (
    FreshState,
    Freshness,
    IngestAck,
    VitalReading,
    VitalStore,
)
from .validate import Finding, FindingCode, ValidationReport, reachable_from_entry, validate_graph
from .vitals import SourceClass, VitalKind, canonical_unit, parse_kind

__version__ = "0.1.0"

__all__ = [
    "Alarm",
    "AlarmMonitor",
    "AlarmState",
    "AlarmThreshold",
    "AuditEvent",
    "AuditKind",
    "DosageBranch",
    "DosageResult",
    "DosageRule",
    "Finding",
    "FindingCode",
    "FreshState",
    "Freshness",
    "GraphKind",
    "IngestAck",
    "ManualClock",
    "MissingDependencyError",
    "MonotonicClock",
    "NodeKind",
    "OperatorVerdict",
    "Purpose",
    "RangeState",
    "RangeStatus",
    "ReplayedState",
    "ResolvedVital",
    "Runtime",
    "Service",
    "ServiceConfig",
    "Session",
    "SessionLog",
    "SourceClass",
    "StatsReport",
    "StepView",
    "TreatmentEdge",
    "TreatmentGraph",
    "TreatmentNode",
    "ValidationReport",
    "VerdictDecision",
    "VitalKind",
    "VitalReading",
    "VitalRequirement",
    "VitalStore",
    "build_runtime",
    "canonical_unit",
    "compute_dosage",
    "evaluate_range",
    "load_config",
    "load_dosage_rules",
    "load_graph_dir",
    "load_graph_file",
    "load_thresholds",
    "parse_graph",
    "parse_kind",
    "parse_thresholds",
    "reachable_from_entry",
    "serialize_graph",
    "serve",
    "start_session",
    "state_from_live",
    "state_from_records",
    "validate_graph",
    "vital_occurrence_stats",
]
