"""Symbolic states, verification conditions and audit triples."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from vdc.lang import syntax as S


@dataclass(frozen=True)
class PointsToChunk:
    addr: object
    value: object


@dataclass(frozen=True)
class HistoryChunk:
    trace: object


@dataclass(frozen=True)
class SymState:
    """Store of symbolic terms, pure path condition and a bag of heap chunks."""

    store: dict
    pc: tuple = ()
    chunks: tuple = ()
    held: frozenset = frozenset()

    def with_(self, **kw) -> "SymState":
        return replace(self, **kw)

    def assume(self, *facts) -> "SymState":
        return replace(self, pc=self.pc + tuple(f for f in facts if not isinstance(f, S.Emp)))

    def history(self):
        for c in self.chunks:
            if isinstance(c, HistoryChunk):
                return c
        return None

    def path_condition(self):
        return S.star(*self.pc) if self.pc else S.Pure(S.BoolLit(True))


VC_KINDS = (
    "branch-low",
    "load-address-low",
    "store-address-low",
    "output-value",
    "output-level",
    "entailment",
    "invariant-establish",
    "invariant-restore",
    "par-split",
    "postcondition",
    "audit-when",
    "audit-release",
)


@dataclass
class VC:
    id: int
    kind: str
    span: S.Span | None
    hyp: object
    goal: object
    proc: str = ""
    message: str = ""
    verdict: object = None  # smt.Verdict once discharged

    @property
    def status(self) -> str:
        if self.verdict is None:
            return "pending"
        return {"valid": "Valid", "invalid": "Invalid", "unknown": "Unknown"}[self.verdict.status]

    def sort_key(self):
        sp = self.span
        pos = (sp.path, sp.line, sp.col) if sp else ("", 0, 0)
        return (pos, VC_KINDS.index(self.kind), self.id)


@dataclass(frozen=True)
class AuditTriple:
    """Context captured at an ``assume``: residue P, trace tr and formula rho."""

    P: object
    tr: object
    rho: object
    span: S.Span | None = field(default=None, compare=False)
    proc: str = field(default="", compare=False)
