"""JSON report assembly shared by the command-line entry points."""

from __future__ import annotations

import json

from vdc import __version__
from vdc.lang.values import HISTORY_KEY, value_to_json
from vdc.parser.printer import format_formula
from vdc.semantics.actions import action_to_json, render_schedule
from vdc.semantics.interp import Abort, Run, Stop


def span_json(span):
    return span.to_json() if span is not None else None


def vc_json(vc) -> dict:
    out = {
        "id": vc.id,
        "kind": vc.kind,
        "status": vc.status,
        "proc": vc.proc,
        "span": span_json(vc.span),
        "hypothesis": format_formula(vc.hyp),
        "goal": format_formula(vc.goal),
    }
    if vc.message:
        out["message"] = vc.message
    if vc.verdict is not None:
        v = vc.verdict.to_json()
        out["engine"] = v.get("engine", "")
        if "countermodel" in v:
            out["countermodel"] = v["countermodel"]
        if "reason" in v:
            out["reason"] = v["reason"]
    return out


def triple_json(triple, when=None, release=None) -> dict:
    out = {
        "proc": triple.proc,
        "span": span_json(triple.span),
        "P": format_formula(triple.P),
        "tr": format_formula(triple.tr) if triple.tr is not None else None,
        "rho": format_formula(triple.rho),
    }
    if when is not None:
        out["when"] = vc_json(when)
    if release is not None:
        out["release"] = vc_json(release)
    return out


def new_report(command: str) -> dict:
    return {
        "tool_version": __version__,
        "command": command,
        "result": None,
        "vcs": [],
        "audit": [],
        "oracle": [],
    }


def config_json(k) -> dict:
    if isinstance(k, Abort):
        return {"kind": "abort"}
    kind = "stop" if isinstance(k, Stop) else "running"
    out = {
        "kind": kind,
        "store": {x: value_to_json(v) for x, v in sorted(k.store.items()) if x != HISTORY_KEY},
        "heap": {str(a): value_to_json(v) for a, v in sorted(k.heap.items())},
        "trace": [value_to_json(e) for e in k.ghost],
        "free_locks": sorted(k.locks),
    }
    if isinstance(k, Run):
        out["command"] = type(k.cmd).__name__
    return out


def schedule_json(sigma) -> dict:
    return {"actions": [action_to_json(a) for a in sigma], "text": render_schedule(sigma)}


def dump(report: dict, path: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=False)
    if path == "-":
        print(text)
    elif path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
