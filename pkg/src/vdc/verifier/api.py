"""Verification entry points: verify, audit and the audit-inlining transform."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from vdc.errors import CapabilityError, DefinitionError
from vdc.lang import syntax as S
from vdc.lang.evaluate import assertion_free_vars, free_vars
from vdc.lang.subst import subst_assertion
from vdc.smt import SolverConfig, Verdict, check_entailment, make_entailment
from vdc.smt.encode import encode_relational
from vdc.verifier.state import VC, AuditTriple
from vdc.verifier.symexec import ATTACKER, Executor

VERIFIED, REFUTED, UNKNOWN = "verified", "refuted", "unknown"


@dataclass
class VerdictBundle:
    status: str
    vcs: list
    triples: list = field(default_factory=list)

    @property
    def failed(self) -> list:
        return [v for v in self.vcs if v.status == "Invalid"]

    @property
    def unknown(self) -> list:
        return [v for v in self.vcs if v.status == "Unknown"]

    def kinds_failed(self) -> set:
        return {v.kind for v in self.failed}


class Discharger:
    """Runs VCs through the backend, memoising identical queries."""

    def __init__(self, program: S.Program, cfg: SolverConfig | None = None, attacker: str | None = None):
        self.program = program
        self.cfg = cfg or SolverConfig()
        self.attacker = attacker
        self.events = {e.name: e.arity for e in program.events}
        self._cache: dict = {}

    def entailment(self, hyp, goal):
        return make_entailment(
            hyp, goal, lattice=self.program.lattice, events=self.events, attacker=self.attacker
        )

    def check(self, hyp, goal) -> Verdict:
        trivial = _syntactic(hyp, goal)
        if trivial is not None:
            return trivial
        ent = self.entailment(hyp, goal)
        key = encode_relational(ent)
        if key not in self._cache:
            try:
                self._cache[key] = check_entailment(ent, self.cfg)
            except CapabilityError as exc:
                self._cache[key] = Verdict("unknown", reason=str(exc), engine="none")
        return self._cache[key]

    def proves(self, hyp, goal) -> bool:
        return self.check(hyp, goal).valid

    def discharge(self, vcs) -> None:
        for vc in vcs:
            if vc.verdict is None:
                vc.verdict = self.check(vc.hyp, vc.goal)


def _syntactic(hyp, goal):
    """Cheap validity shortcuts; ``None`` when the solver must decide."""
    if goal == S.Pure(S.BoolLit(True)) or isinstance(goal, S.Emp):
        return Verdict("valid", engine="syntactic")
    if isinstance(goal, S.Classify) and not free_vars(goal.expr) and not _has_attacker(goal.expr):
        return Verdict("valid", engine="syntactic")
    if goal in S.conjuncts(hyp):
        return Verdict("valid", engine="syntactic")
    return None


def _has_attacker(e) -> bool:
    if isinstance(e, S.AttackerLevel):
        return True
    return any(_has_attacker(getattr(e, f)) for f in ("left", "right", "arg", "cond", "then", "orelse") if hasattr(e, f)) or (
        isinstance(e, S.Call) and any(_has_attacker(a) for a in e.args)
    )


def _bundle_status(vcs) -> str:
    if any(v.status == "Invalid" for v in vcs):
        return REFUTED
    if all(v.status == "Valid" for v in vcs):
        return VERIFIED
    return UNKNOWN


def verify(program: S.Program, cfg: SolverConfig | None = None, *, attacker: str | None = None, procs=None) -> VerdictBundle:
    """Symbolically execute every procedure and discharge the resulting VCs."""
    d = Discharger(program, cfg, attacker)
    vcs, triples = [], []
    for pr in program.procs:
        if procs is not None and pr.name not in procs:
            continue
        ex = Executor(program, pr, oracle=d.proves).run()
        vcs += ex.vcs
        triples += ex.triples
    d.discharge(vcs)
    _renumber(vcs)
    return VerdictBundle(_bundle_status(vcs), vcs, triples)


def _renumber(vcs):
    vcs.sort(key=VC.sort_key)
    for i, v in enumerate(vcs):
        v.id = i


# ---------------------------------------------------------------- audit


def audit_obligations(triple: AuditTriple, policy: S.PolicyDecl, program: S.Program) -> list:
    """The audit-when and audit-release VCs of one triple."""
    if triple.tr is None:
        raise DefinitionError(
            f"assume at {triple.span} is not covered by a History predicate, so it cannot be audited"
        )
    _check_vocabulary(triple, policy, program)
    when, release = instantiate_policy(policy, triple.tr, avoid=_names(triple))
    span, proc = triple.span, triple.proc
    return [
        VC(0, "audit-when", span, triple.P, when, proc, f"policy {policy.name}: release condition"),
        VC(1, "audit-release", span, S.star(triple.P, release), triple.rho, proc, f"policy {policy.name}: released formula"),
    ]


def _names(triple) -> set:
    out = assertion_free_vars(triple.P) | assertion_free_vars(triple.rho)
    if triple.tr is not None:
        out |= free_vars(triple.tr)
    return out


def instantiate_policy(policy: S.PolicyDecl, tr, avoid=()):
    """``(phi_D[tr], rho_D[tr])`` with parameters quantified away.

    A parameterised policy releases ``rho`` for every parameter choice that
    meets its condition, so the condition becomes ``exists params. phi`` and
    the release becomes ``forall params. phi ==> rho``.
    """
    m = {policy.trace_var: tr}
    phi = subst_assertion(policy.when, m)
    rho = subst_assertion(policy.release, m)
    if not policy.params:
        return phi, rho
    names = tuple(policy.params)
    clash = set(names) & (set(avoid) | free_vars(tr))
    if clash:
        ren = {}
        taken = set(avoid) | free_vars(tr) | set(names)
        for n in names:
            new = n
            k = 0
            while new in taken:
                k += 1
                new = f"{n}_{k}"
            taken.add(new)
            ren[n] = S.Var(new)
        phi, rho = subst_assertion(phi, ren), subst_assertion(rho, ren)
        names = tuple(ren[n].name for n in names)
    return S.Exists(names, phi), S.Forall(names, S.Implies(phi, rho))


def _check_vocabulary(triple, policy, program):
    known = {e.name for e in program.events}
    for c in _calls(triple.tr):
        if c not in known and c not in S.BUILTINS:
            raise DefinitionError(f"trace mentions event {c!r} unknown to policy {policy.name}")


def _calls(e):
    if isinstance(e, S.Call):
        yield e.fn
        for a in e.args:
            yield from _calls(a)
    for f in ("left", "right", "arg", "cond", "then", "orelse"):
        if hasattr(e, f):
            yield from _calls(getattr(e, f))


@dataclass
class AuditReport:
    policy: str
    vcs: list

    @property
    def status(self) -> str:
        return _bundle_status(self.vcs)


def audit(triples, policy: S.PolicyDecl, program: S.Program, cfg: SolverConfig | None = None, *, attacker=None) -> AuditReport:
    d = Discharger(program, cfg, attacker)
    vcs = []
    for t in triples:
        vcs += audit_obligations(t, policy, program)
    d.discharge(vcs)
    for i, v in enumerate(vcs):
        v.id = i
    return AuditReport(policy.name, vcs)


# ---------------------------------------------------------------- inlining


def inline_audit(program: S.Program, policy: S.PolicyDecl) -> S.Program:
    """Replace each unjustified ``assume(rho)`` by the inlined audit check."""
    procs = tuple(replace(p, body=_inline(p.body, policy)) for p in program.procs)
    return replace(program, procs=procs)


def _inline(c, policy):
    if isinstance(c, S.Assume) and c.by is None:
        hist = S.HistoryTerm()
        when, release = instantiate_policy(policy, hist, avoid=assertion_free_vars(c.formula))
        sp = c.span
        return S.seq(
            S.Assert(when, span=sp),
            S.Assume(release, by=policy.name, span=sp),
            S.Assert(c.formula, span=sp),
        )
    if isinstance(c, S.Seq):
        return replace(c, first=_inline(c.first, policy), second=_inline(c.second, policy))
    if isinstance(c, S.If):
        return replace(c, then=_inline(c.then, policy), orelse=_inline(c.orelse, policy))
    if isinstance(c, S.While):
        return replace(c, body=_inline(c.body, policy))
    if isinstance(c, S.Par):
        return replace(
            c,
            left=replace(c.left, body=_inline(c.left.body, policy)),
            right=replace(c.right, body=_inline(c.right.body, policy)),
        )
    return c


def verify_with_audit(program, policy, cfg=None, *, attacker=None):
    """``verify`` followed by ``audit``; returns (bundle, report, overall status)."""
    b = verify(program, cfg, attacker=attacker)
    rep = audit(b.triples, policy, program, cfg, attacker=attacker)
    return b, rep, _bundle_status(b.vcs + rep.vcs)


__all__ = [
    "ATTACKER",
    "AuditReport",
    "Discharger",
    "REFUTED",
    "UNKNOWN",
    "VERIFIED",
    "VerdictBundle",
    "audit",
    "audit_obligations",
    "inline_audit",
    "instantiate_policy",
    "verify",
    "verify_with_audit",
]
