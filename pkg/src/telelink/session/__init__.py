"""Deterministic operator/avatar session harness."""

from .analysis import (SweepPoint, SweepResult, coupled_energy, parse_delays,
                       settled_energy_rise, stability_sweep, with_delay)
from .core import (AvatarArm, EventKind, IllegalTransition, Mode, OperatorHand, SafetyState,
                   Session, estop, run_session)
from .metrics import LatencyBudget, MetricsLog, VideoRecord, latency_budget, read_metrics_csv
from .trace import (OperatorTrace, TraceError, TraceSample, generate_trace, head_step_trace,
                    load_trace, parse_trace, write_trace)

__all__ = [
    "AvatarArm", "EventKind", "SweepPoint", "SweepResult", "coupled_energy", "parse_delays",
    "settled_energy_rise", "stability_sweep", "with_delay", "IllegalTransition", "LatencyBudget", "MetricsLog", "Mode",
    "OperatorHand", "OperatorTrace", "SafetyState", "Session", "TraceError", "TraceSample",
    "VideoRecord", "estop", "generate_trace", "head_step_trace", "latency_budget",
    "load_trace", "parse_trace", "read_metrics_csv", "run_session", "write_trace",
]
