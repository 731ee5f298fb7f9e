"""Deciding entailments with an external SMT solver or by enumeration."""

from __future__ import annotations

import os
import shutil
import subprocess
from dataclasses import dataclass, field
from itertools import product

from vdc.errors import CapabilityError, DefinitionError, SoundnessError
from vdc.lang import syntax as S
from vdc.lang.sorts import BOOL, EVENT, INT, LABEL, TRACE
from vdc.lang.values import Event, FMap, render_value, value_to_json
from vdc.releval import RelEval
from vdc.smt.encode import ATT, Entailment, encode_relational, var_name
from vdc.smt.sexpr import parse_sexprs

VALID, INVALID, UNKNOWN = "valid", "invalid", "unknown"
DEFAULT_TIMEOUT = 10.0


@dataclass(frozen=True)
class Countermodel:
    major: dict
    minor: dict
    attacker: str

    def to_json(self) -> dict:
        return {
            "major": {k: value_to_json(v) for k, v in sorted(self.major.items())},
            "minor": {k: value_to_json(v) for k, v in sorted(self.minor.items())},
            "attacker": self.attacker,
        }

    def __str__(self):
        names = sorted(set(self.major) | set(self.minor))
        parts = [f"{n}: {render_value(self.major.get(n))} / {render_value(self.minor.get(n))}" for n in names]
        return f"attacker={self.attacker}; " + ", ".join(parts)


@dataclass(frozen=True)
class Verdict:
    status: str
    model: Countermodel | None = None
    reason: str = ""
    engine: str = ""

    @property
    def valid(self) -> bool:
        return self.status == VALID

    @property
    def invalid(self) -> bool:
        return self.status == INVALID

    def to_json(self) -> dict:
        out = {"status": self.status, "engine": self.engine}
        if self.model is not None:
            out["countermodel"] = self.model.to_json()
        if self.reason:
            out["reason"] = self.reason
        return out


@dataclass
class SolverConfig:
    solver: str | None = None  # executable; falls back to $VDC_SOLVER, then z3 on PATH
    timeout: float = DEFAULT_TIMEOUT
    ranges: tuple | None = None  # (lo, hi) for brute-force fallback / witness search
    max_trace_len: int = 2
    max_pairs: int = 2_000_000
    extra_args: tuple = field(default=())


def find_solver(cfg: SolverConfig) -> str | None:
    cand = cfg.solver or os.environ.get("VDC_SOLVER") or "z3"
    if os.path.sep in cand:
        return cand if os.access(cand, os.X_OK) else None
    return shutil.which(cand)


def _solver_argv(path: str, cfg: SolverConfig) -> list:
    base = os.path.basename(path).lower()
    if base.startswith("z3"):
        return [path, "-in", "-smt2", *cfg.extra_args]
    if base.startswith("cvc"):
        return [path, "--lang=smt2", "--produce-models", *cfg.extra_args]
    return [path, *cfg.extra_args]


# ------------------------------------------------------------------- models


def _expand_lets(sx, env=None):
    env = env or {}
    if isinstance(sx, str):
        return env.get(sx, sx)
    if sx and sx[0] == "let" and len(sx) == 3:
        inner = dict(env)
        for name, val in sx[1]:
            inner[name] = _expand_lets(val, env)
        return _expand_lets(sx[2], inner)
    return [_expand_lets(x, env) for x in sx]


def _value(sx, srt, events):
    if isinstance(sx, list) and len(sx) == 3 and sx[0] == "as":
        return _value(sx[1], srt, events)
    if srt == INT:
        if isinstance(sx, list):
            if sx[0] == "-" and len(sx) == 2:
                return -_value(sx[1], INT, events)
            raise ValueError(f"unexpected integer term {sx!r}")
        return int(sx)
    if srt == BOOL:
        return sx == "true"
    if srt == LABEL:
        return sx[2:] if isinstance(sx, str) and sx.startswith("L_") else None
    if srt == EVENT:
        if isinstance(sx, str):
            return Event(sx[2:], ())
        return Event(sx[0][2:], tuple(_value(x, INT, events) for x in sx[1:]))
    if srt == TRACE:
        out = []
        while isinstance(sx, list) and sx and sx[0] == "snoc":
            out.append(_value(sx[2], EVENT, events))
            sx = sx[1]
            if isinstance(sx, list) and len(sx) == 3 and sx[0] == "as":
                sx = sx[1]
        if sx != "nil":
            raise ValueError(f"unexpected trace term {sx!r}")
        return tuple(reversed(out))
    raise ValueError(srt)


def default_value(srt, lattice):
    return {INT: 0, BOOL: False, LABEL: "low", TRACE: (), EVENT: None}[srt]


def parse_model(text: str, ent: Entailment) -> Countermodel:
    forms = parse_sexprs(text)
    if forms and forms[0] == "model":
        forms = forms[1:]
    elif len(forms) == 1 and isinstance(forms[0], list):
        forms = forms[0]
        if forms and forms[0] == "model":
            forms = forms[1:]
    defs = {}
    for f in forms:
        if isinstance(f, list) and len(f) == 5 and f[0] == "define-fun" and f[2] == []:
            defs[f[1]] = f[4]
    sorts = ent.sort_map
    events = dict(ent.events)
    major, minor = {}, {}
    for name, srt in sorts.items():
        for side, target in ((1, major), (2, minor)):
            key = var_name(name, side)
            if key in defs:
                target[name] = _value(_expand_lets(defs[key]), srt, events)
            else:
                target[name] = _unconstrained(srt, ent)
    if ent.attacker is not None:
        att = ent.attacker
    elif ATT in defs:
        att = _value(defs[ATT], LABEL, events)
    else:
        att = "low"
    return Countermodel(major, minor, att)


def _unconstrained(srt, ent):
    if srt == EVENT:
        if ent.events:
            name, arity = ent.events[0]
            return Event(name, (0,) * arity)
        return Event("_none", ())
    return default_value(srt, ent.lattice)


# ------------------------------------------------------------------- replay


def _has_quantifier(a) -> bool:
    if isinstance(a, (S.Exists, S.Forall)):
        return True
    if isinstance(a, (S.Star, S.Implies)):
        return _has_quantifier(a.left) or _has_quantifier(a.right)
    return False


def replay(ent: Entailment, model: Countermodel, domain=None) -> bool:
    """True iff the countermodel satisfies the hypothesis and falsifies the goal."""
    ev = RelEval(ent.lattice, model.attacker, domain)
    s1, s2 = FMap(model.major), FMap(model.minor)
    if not all(ev.pure(s1, s2, lem) for lem in ent.lemmas):
        return False
    return ev.pure(s1, s2, ent.hyp) and not ev.pure(s1, s2, ent.goal)


# ------------------------------------------------------------------- engines


def run_solver(text: str, cfg: SolverConfig) -> tuple:
    """Return (first line of answer, rest of output) or raise for a missing solver."""
    path = find_solver(cfg)
    if path is None:
        raise FileNotFoundError("no SMT solver found")
    try:
        proc = subprocess.run(
            _solver_argv(path, cfg),
            input=text,
            capture_output=True,
            text=True,
            timeout=cfg.timeout,
        )
    except subprocess.TimeoutExpired:
        return "timeout", ""
    out = proc.stdout.strip()
    if not out:
        return "error", proc.stderr.strip()
    head, _, rest = out.partition("\n")
    return head.strip(), rest


def check_entailment(ent: Entailment, cfg: SolverConfig | None = None) -> Verdict:
    cfg = cfg or SolverConfig()
    if find_solver(cfg) is None:
        if cfg.ranges is not None:
            return brute_force_entailment(ent, cfg.ranges, max_trace_len=cfg.max_trace_len, max_pairs=cfg.max_pairs)
        return Verdict(UNKNOWN, reason="no SMT solver available", engine="none")
    text = encode_relational(ent)
    head, rest = run_solver(text, cfg)
    if head == "unsat":
        return Verdict(VALID, engine="smt")
    if head == "timeout":
        return Verdict(UNKNOWN, reason=f"solver timed out after {cfg.timeout:g}s", engine="smt")
    if head != "sat":
        detail = (head + " " + rest).strip()
        return Verdict(UNKNOWN, reason=f"solver answered: {detail[:300]}", engine="smt")
    try:
        model = parse_model(rest, ent)
    except (ValueError, IndexError) as exc:
        return Verdict(UNKNOWN, reason=f"unreadable model: {exc}", engine="smt")
    quantified = any(_has_quantifier(a) for a in ent.formulas())
    domain = None
    if quantified:
        lo, hi = cfg.ranges or (-2, 8)
        domain = list(range(lo, hi + 1))
    try:
        ok = replay(ent, model, domain)
    except (CapabilityError, DefinitionError) as exc:
        if quantified:
            return Verdict(UNKNOWN, model=model, reason=f"countermodel not replayable: {exc}", engine="smt")
        raise SoundnessError(f"countermodel replay failed: {exc}") from exc
    if not ok:
        if quantified:
            return Verdict(UNKNOWN, model=model, reason="countermodel not confirmed by finite replay", engine="smt")
        raise SoundnessError(f"solver countermodel does not refute the entailment: {model}")
    return Verdict(INVALID, model=model, engine="smt")


def _traces(events, values, max_len):
    evs = [Event(n, f) for n, a in events for f in product(values, repeat=a)]
    out = []
    for n in range(max_len + 1):
        out.extend(product(evs, repeat=n))
    return out


def sort_domain(srt, ent: Entailment, values, max_trace_len):
    if srt == INT:
        return list(values)
    if srt == BOOL:
        return [False, True]
    if srt == LABEL:
        return list(ent.lattice.levels)
    if srt == EVENT:
        return [Event(n, f) for n, a in ent.events for f in product(values, repeat=a)]
    if srt == TRACE:
        return _traces(ent.events, values, max_trace_len)
    raise CapabilityError(f"no finite domain for sort {srt}")


def brute_force_entailment(ent: Entailment, ranges, *, max_trace_len: int = 2, max_pairs: int = 2_000_000) -> Verdict:
    """Exhaustive check over the given integer range (inclusive ``(lo, hi)``)."""
    lo, hi = ranges
    values = list(range(lo, hi + 1))
    names = [n for n, _ in ent.sorts]
    doms = [sort_domain(s, ent, values, max_trace_len) for _, s in ent.sorts]
    levels = [ent.attacker] if ent.attacker else list(ent.lattice.levels)
    total = len(levels)
    for d in doms:
        total *= len(d) ** 2
    if total > max_pairs:
        raise CapabilityError(f"brute force would enumerate {total} pairs (limit {max_pairs})")
    evaluators = {lv: RelEval(ent.lattice, lv, values) for lv in levels}
    pair_doms = [list(product(d, d)) for d in doms]
    for att in levels:
        ev = evaluators[att]
        for combo in product(*pair_doms):
            s1 = FMap({n: v[0] for n, v in zip(names, combo)})
            s2 = FMap({n: v[1] for n, v in zip(names, combo)})
            if not all(ev.pure(s1, s2, lem) for lem in ent.lemmas):
                continue
            if ev.pure(s1, s2, ent.hyp) and not ev.pure(s1, s2, ent.goal):
                return Verdict(INVALID, model=Countermodel(dict(s1), dict(s2), att), engine="brute-force")
    return Verdict(VALID, engine="brute-force")
