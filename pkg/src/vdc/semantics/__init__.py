"""Concrete small-step semantics."""

from vdc.semantics.actions import (
    LEFT,
    RIGHT,
    TAU,
    AssumeAct,
    Left,
    LoadAct,
    OutAct,
    Right,
    StoreAct,
    Tau,
    TraceAct,
    action_to_json,
    render_schedule,
    trace_of,
)
from vdc.semantics.interp import ABORT, Abort, Run, RunSet, Stop, initial, runs, step

__all__ = [
    "ABORT", "Abort", "AssumeAct", "LEFT", "Left", "LoadAct", "OutAct", "RIGHT", "Right",
    "Run", "RunSet", "Stop", "StoreAct", "TAU", "Tau", "TraceAct", "action_to_json",
    "initial", "render_schedule", "runs", "step", "trace_of",
]
