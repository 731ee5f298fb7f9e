"""Actions emitted by execution steps and the schedules they form."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from vdc.lang.values import FMap, render_store, render_value, value_to_json


@dataclass(frozen=True)
class Tau:
    # field-less dataclasses all hash like (), which makes schedules collide
    def __hash__(self):
        return hash("tau")

    def __str__(self):
        return "tau"


@dataclass(frozen=True)
class Left:
    def __hash__(self):
        return hash("L")

    def __str__(self):
        return "L"


@dataclass(frozen=True)
class Right:
    def __hash__(self):
        return hash("R")

    def __str__(self):
        return "R"


@dataclass(frozen=True)
class OutAct:
    level: str
    value: Any

    def __str__(self):
        return f"out({self.level}, {render_value(self.value)})"


@dataclass(frozen=True)
class AssumeAct:
    """Carries the store at the step (with the ghost trace) and the formula."""

    store: FMap
    formula: Any

    def __str__(self):
        from vdc.parser.printer import format_formula

        return f"assume({render_store(self.store)}, {format_formula(self.formula)})"


@dataclass(frozen=True)
class LoadAct:
    addr: int

    def __str__(self):
        return f"load {self.addr}"


@dataclass(frozen=True)
class StoreAct:
    addr: int

    def __str__(self):
        return f"store {self.addr}"


@dataclass(frozen=True)
class TraceAct:
    event: Any

    def __str__(self):
        return f"trace({render_value(self.event)})"


TAU = Tau()
LEFT = Left()
RIGHT = Right()


def trace_of(schedule) -> tuple:
    """Payloads of the trace actions, in order."""
    return tuple(a.event for a in schedule if isinstance(a, TraceAct))


def render_schedule(schedule) -> str:
    return "<" + ", ".join(str(a) for a in schedule) + ">"


def action_to_json(a) -> dict:
    if isinstance(a, OutAct):
        return {"kind": "out", "level": a.level, "value": value_to_json(a.value)}
    if isinstance(a, AssumeAct):
        from vdc.parser.printer import format_formula

        store = {k: value_to_json(v) for k, v in sorted(a.store.items(), key=lambda kv: str(kv[0]))}
        return {"kind": "assume", "store": store, "formula": format_formula(a.formula)}
    if isinstance(a, (LoadAct, StoreAct)):
        return {"kind": "load" if isinstance(a, LoadAct) else "store", "addr": a.addr}
    if isinstance(a, TraceAct):
        return {"kind": "trace", "event": value_to_json(a.event)}
    return {"kind": str(a)}
