"""``vdc`` command-line driver."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field

from vdc.errors import CapabilityError, DefinitionError, ParseError, SoundnessError, UsageError, VdcError
from vdc.oracle import (
    DEFAULT_MAX_NODES,
    BUDGET,
    FAIL,
    PAPER,
    SOUND,
    build_space,
    check_policy_agnostic,
    check_policy_specific,
    merge_reports,
    project,
)
from vdc.parser import parse_file
from vdc.parser.printer import format_program
from vdc.report import config_json, dump, new_report, schedule_json, triple_json, vc_json
from vdc.semantics.interp import Run, initial, runs, step
from vdc.smt import SolverConfig
from vdc.verifier import REFUTED, VERIFIED, audit_obligations, inline_audit, verify
from vdc.verifier.api import Discharger

log = logging.getLogger("vdc")

EXIT_OK, EXIT_FAIL, EXIT_UNKNOWN, EXIT_USAGE = 0, 1, 2, 3
DEFAULT_MAX_STEPS = 14
DEFAULT_TIMEOUT = 10.0


@dataclass
class RunConfig:
    """Every knob of a CLI invocation; all fields have defaults."""

    command: str = "verify"
    files: list = field(default_factory=list)
    attacker: str | None = None
    solver: str | None = None
    timeout: float = DEFAULT_TIMEOUT
    ranges: tuple | None = None
    max_steps: int = DEFAULT_MAX_STEPS
    max_nodes: int = DEFAULT_MAX_NODES
    direction: str = SOUND
    report: str | None = None
    policy: str | None = None
    proc: str | None = None
    visible: str | None = None
    assignments: dict = field(default_factory=dict)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(solver=self.solver, timeout=self.timeout, ranges=self.ranges)


def parse_range(text: str) -> tuple:
    try:
        lo, hi = text.split("..")
        lo, hi = int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO..HI, got {text!r}") from None
    if lo > hi:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return lo, hi


def _assignment(text: str):
    name, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name.strip(), int(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value of {name!r} must be an integer") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="vdc", description="Verifier and knowledge oracle for declassification.")
    ap.add_argument("--version", action="version", version=_version())
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("file")
        p.add_argument("--policy")
        p.add_argument("--attacker", metavar="LVL")
        p.add_argument("--solver", metavar="PATH")
        p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT, help="seconds per solver query")
        p.add_argument("--range", dest="ranges", type=parse_range, metavar="LO..HI")
        p.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
        p.add_argument("--max-nodes", type=int, default=DEFAULT_MAX_NODES, help="oracle schedule budget")
        p.add_argument("--visibility-direction", dest="direction", choices=[SOUND, PAPER], default=SOUND)
        p.add_argument("--json", dest="report", metavar="PATH", help="write the JSON report ('-' for stdout)")
        p.add_argument("--proc", help="procedure to run (oracle/run)")
        p.add_argument("-v", "--verbose", action="store_true")

    for name, helptext in (
        ("verify", "check every procedure"),
        ("audit", "verify, then check audit obligations against a policy"),
        ("inline-audit", "print the program with audit checks inlined"),
        ("oracle", "exhaustively check the security theorems on a finite space"),
        ("run", "enumerate concrete schedules"),
    ):
        p = sub.add_parser(name, help=helptext)
        common(p)
        if name == "run":
            p.add_argument("--visible", metavar="LVL", help="also emit projections for this attacker")
            p.add_argument("--set", dest="assignments", action="append", type=_assignment, default=[],
                           metavar="NAME=VAL", help="pin an initial variable or heap cell ([a]=v)")
    return ap


def _version() -> str:
    from vdc import __version__

    return f"vdc {__version__}"


def config_from_args(ns) -> RunConfig:
    return RunConfig(
        command=ns.command,
        files=[ns.file],
        attacker=ns.attacker,
        solver=ns.solver,
        timeout=ns.timeout,
        ranges=ns.ranges,
        max_steps=ns.max_steps,
        max_nodes=ns.max_nodes,
        direction=ns.direction,
        report=ns.report,
        policy=ns.policy,
        proc=ns.proc,
        visible=getattr(ns, "visible", None),
        assignments=dict(getattr(ns, "assignments", []) or []),
    )


def _say(cfg: RunConfig, text: str = ""):
    if cfg.report != "-":
        print(text)


# ------------------------------------------------------------------ commands


def _select_policy(program, name):
    if name is None:
        if len(program.policies) == 1:
            return program.policies[0]
        raise UsageError("--policy is required (the program declares %d policies)" % len(program.policies))
    try:
        return program.policy(name)
    except KeyError:
        raise UsageError(f"unknown policy {name!r}") from None


def _exit_for(status: str) -> int:
    return {VERIFIED: EXIT_OK, REFUTED: EXIT_FAIL}.get(status, EXIT_UNKNOWN)


def _show_vcs(cfg, vcs):
    for v in vcs:
        if v.status != "Valid":
            where = f"{v.span.line}:{v.span.col}" if v.span else "?"
            detail = v.message or (v.verdict.reason if v.verdict else "")
            _say(cfg, f"  {v.status:8} {v.kind:20} {where:8} {detail}")
            if v.verdict is not None and v.verdict.model is not None:
                _say(cfg, f"           countermodel: {v.verdict.model}")


def cmd_verify(program, cfg: RunConfig, report: dict) -> int:
    bundle = verify(program, cfg.solver_config(), attacker=cfg.attacker)
    report["vcs"] = [vc_json(v) for v in bundle.vcs]
    report["audit"] = [triple_json(t) for t in bundle.triples]
    report["result"] = bundle.status
    _say(cfg, f"{bundle.status}: {len(bundle.vcs)} VCs, {len(bundle.failed)} invalid, {len(bundle.unknown)} unknown")
    _show_vcs(cfg, bundle.vcs)
    return _exit_for(bundle.status)


def cmd_audit(program, cfg: RunConfig, report: dict) -> int:
    policy = _select_policy(program, cfg.policy)
    bundle = verify(program, cfg.solver_config(), attacker=cfg.attacker)
    d = Discharger(program, cfg.solver_config(), cfg.attacker)
    audit_vcs = []
    entries = []
    for t in bundle.triples:
        when, release = audit_obligations(t, policy, program)
        d.discharge([when, release])
        when.id, release.id = len(audit_vcs), len(audit_vcs) + 1
        audit_vcs += [when, release]
        entries.append(triple_json(t, when, release))
    report["vcs"] = [vc_json(v) for v in bundle.vcs]
    report["audit"] = entries
    everything = bundle.vcs + audit_vcs
    if any(v.status == "Invalid" for v in everything):
        status = REFUTED
    elif all(v.status == "Valid" for v in everything):
        status = VERIFIED
    else:
        status = "unknown"
    report["result"] = status
    report["policy"] = policy.name
    _say(cfg, f"{status}: {len(bundle.vcs)} VCs, {len(bundle.triples)} audit triple(s) against policy {policy.name}")
    _show_vcs(cfg, everything)
    return _exit_for(status)


def cmd_inline_audit(program, cfg: RunConfig, report: dict) -> int:
    policy = _select_policy(program, cfg.policy)
    out = inline_audit(program, policy)
    text = format_program(out)
    report["result"] = "ok"
    report["program"] = text
    _say(cfg, text.rstrip("\n"))
    return EXIT_OK


def _levels(program, cfg):
    return [cfg.attacker] if cfg.attacker else list(program.lattice.levels)


def _space_ranges(cfg):
    return cfg.ranges if cfg.ranges is not None else {}


def cmd_oracle(program, cfg: RunConfig, report: dict) -> int:
    policy = _select_policy(program, cfg.policy) if cfg.policy else None
    agnostic, specific = [], []
    for lvl in _levels(program, cfg):
        space = build_space(program, _space_ranges(cfg), level=lvl, proc=cfg.proc, direction=cfg.direction)
        agnostic.append(check_policy_agnostic(program, space, cfg.max_steps, max_nodes=cfg.max_nodes))
        if policy is not None:
            specific.append(check_policy_specific(program, policy, space, cfg.max_steps, max_nodes=cfg.max_nodes))
    reports = [merge_reports(agnostic)] + ([merge_reports(specific)] if specific else [])
    report["oracle"] = [r.to_json() for r in reports]
    if policy is not None:
        report["policy"] = policy.name
    if any(r.status == FAIL for r in reports):
        result, code = "violation", EXIT_FAIL
    elif any(r.status == BUDGET for r in reports):
        result, code = "budget-exceeded", EXIT_UNKNOWN
    else:
        result, code = "pass", EXIT_OK
    report["result"] = result
    for r in reports:
        _say(cfg, f"{r.theorem}: {r.status} ({r.states_checked} states, {r.prefixes_checked} prefixes)")
        if r.violations:
            w = r.violations[0]
            _say(cfg, f"  witness [{w['kind']}, attacker {w['level']}]: major {w['major']} minor {w['minor']}")
    return code


def _steps(sigma) -> int:
    from vdc.oracle.knowledge import is_scheduling

    return sum(1 for a in sigma if not is_scheduling(a))


def cmd_run(program, cfg: RunConfig, report: dict) -> int:
    ranges = cfg.ranges or (0, 3)
    space = build_space(program, ranges, level=cfg.attacker or "low", proc=cfg.proc)
    chosen = None
    for st in space.states:
        ok = True
        for name, val in cfg.assignments.items():
            if name.startswith("["):
                addr = int(name.strip("[]"))
                ok = ok and st.heap.get(addr) == val
            else:
                ok = ok and st.store.get(name) == val
        if ok:
            chosen = st
            break
    if chosen is None:
        raise UsageError("no initial state in the range satisfies the precondition and --set pins")
    k0 = initial(space.cmd, chosen.store, chosen.heap, space.locks, ())
    rs = runs(k0, cfg.max_steps)
    maximal = []
    for sigma, k in sorted(rs.pairs, key=lambda p: (len(p[0]), str(p[0]))):
        if not isinstance(k, Run) or not step(k) or _steps(sigma) == cfg.max_steps:
            entry = {"schedule": schedule_json(sigma), "final": config_json(k)}
            if isinstance(k, Run) and not step(k):
                entry["final"]["kind"] = "blocked"
            if cfg.visible:
                entry["visible"] = schedule_json(project(cfg.visible, sigma, lattice=program.lattice, direction=cfg.direction))
            maximal.append(entry)
    report["result"] = "budget-exceeded" if rs.budget_exceeded else "complete"
    report["initial"] = chosen.to_json()
    report["runs"] = maximal
    report["budget_exceeded"] = rs.budget_exceeded
    _say(cfg, f"initial state {chosen}: {len(maximal)} maximal schedule(s)"
         + (" (step budget reached)" if rs.budget_exceeded else ""))
    for e in maximal[:50]:
        _say(cfg, f"  {e['schedule']['text']} -> {e['final']['kind']}")
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "audit": cmd_audit,
    "inline-audit": cmd_inline_audit,
    "oracle": cmd_oracle,
    "run": cmd_run,
}


def execute(cfg: RunConfig) -> tuple:
    """Run one command; returns ``(exit code, report dict)``."""
    report = new_report(cfg.command)
    try:
        program = parse_file(cfg.files[0])
        if cfg.attacker is not None:
            program.lattice.check(cfg.attacker)
        if cfg.visible is not None:
            program.lattice.check(cfg.visible)
        code = COMMANDS[cfg.command](program, cfg, report)
    except FileNotFoundError as exc:
        code = _error(report, cfg, f"cannot read {exc.filename}")
    except ParseError as exc:
        report["diagnostics"] = [d.to_json() for d in exc.diagnostics]
        code = _error(report, cfg, str(exc))
    except (UsageError, DefinitionError, CapabilityError) as exc:
        code = _error(report, cfg, str(exc))
    except SoundnessError as exc:
        code = _error(report, cfg, f"internal soundness check failed: {exc}", EXIT_UNKNOWN)
    except VdcError as exc:
        code = _error(report, cfg, str(exc))
    return code, report


def _error(report, cfg, msg, code=EXIT_USAGE) -> int:
    report["result"] = "error"
    report["error"] = msg
    print(f"vdc: error: {msg}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    cfg = config_from_args(ns)
    code, report = execute(cfg)
    dump(report, cfg.report)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
