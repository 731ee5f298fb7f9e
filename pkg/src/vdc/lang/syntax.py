"""Abstract syntax for expressions, assertions, commands and programs.

All nodes are frozen dataclasses. Source spans are carried on every node but
excluded from equality, so structurally equal trees compare equal regardless
of where they were parsed from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    end_line: int
    end_col: int
    path: str = ""

    def __str__(self) -> str:
        where = f"{self.path}:" if self.path else ""
        return f"{where}{self.line}:{self.col}"

    def to_json(self) -> dict:
        return {
            "path": self.path,
            "line": self.line,
            "col": self.col,
            "end_line": self.end_line,
            "end_col": self.end_col,
        }


def _span():
    return field(default=None, compare=False, repr=False, kw_only=True)


# ---------------------------------------------------------------- expressions


@dataclass(frozen=True)
class IntLit:
    value: int
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class BoolLit:
    value: bool
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Var:
    name: str
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class LabelLit:
    name: str
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class AttackerLevel:
    """The attacker's level, as seen from inside a formula."""

    span: Optional[Span] = _span()


@dataclass(frozen=True)
class HistoryTerm:
    """The current event trace (only meaningful inside annotations)."""

    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Nil:
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Not:
    arg: "Expr"
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Neg:
    arg: "Expr"
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Ite:
    cond: "Expr"
    then: "Expr"
    orelse: "Expr"
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Call:
    """Built-in trace function (len, sum, contains, snoc) or event constructor."""

    fn: str
    args: tuple
    span: Optional[Span] = _span()


Expr = Union[IntLit, BoolLit, Var, LabelLit, AttackerLevel, HistoryTerm, Nil, BinOp, Not, Neg, Ite, Call]

BUILTINS = {"len": 1, "sum": 1, "contains": 2, "snoc": 2}
ARITH_OPS = {"+", "-", "*", "/", "%"}
CMP_OPS = {"<", "<=", ">", ">="}
EQ_OPS = {"==", "!="}
BOOL_OPS = {"&&", "||"}


# ----------------------------------------------------------------- assertions


@dataclass(frozen=True)
class Pure:
    """A boolean formula; relationally it must hold in both states."""

    expr: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Classify:
    """``expr :: level``"""

    expr: Expr
    level: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Emp:
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class PointsTo:
    addr: Expr
    value: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Star:
    left: "Assertion"
    right: "Assertion"
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Implies:
    left: "Assertion"
    right: "Assertion"
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Exists:
    names: tuple
    body: "Assertion"
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Forall:
    names: tuple
    body: "Assertion"
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class HistoryPred:
    trace: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class PredApp:
    name: str
    args: tuple
    span: Optional[Span] = _span()


Assertion = Union[Pure, Classify, Emp, PointsTo, Star, Implies, Exists, Forall, HistoryPred, PredApp]
ASSERTION_TYPES = (Pure, Classify, Emp, PointsTo, Star, Implies, Exists, Forall, HistoryPred, PredApp)


def star(*parts: Assertion) -> Assertion:
    """Left-nested separating conjunction; adjacent pure formulas are merged."""
    acc: Optional[Assertion] = None
    for p in parts:
        if acc is None:
            acc = p
        elif isinstance(acc, Pure) and isinstance(p, Pure):
            acc = Pure(BinOp("&&", acc.expr, p.expr))
        elif isinstance(acc, Emp):
            acc = p
        elif isinstance(p, Emp):
            continue
        else:
            acc = Star(acc, p)
    return acc if acc is not None else Emp()


def conjuncts(a: Assertion) -> list:
    """Flatten a star tree (and top-level ``&&`` inside pure formulas)."""
    if isinstance(a, Star):
        return conjuncts(a.left) + conjuncts(a.right)
    if isinstance(a, Pure) and isinstance(a.expr, BinOp) and a.expr.op == "&&":
        return conjuncts(Pure(a.expr.left)) + conjuncts(Pure(a.expr.right))
    if isinstance(a, Emp):
        return []
    return [a]


def is_pure(a: Assertion) -> bool:
    """No points-to, no History, no abstract predicate."""
    if isinstance(a, (Pure, Classify, Emp)):
        return True
    if isinstance(a, (PointsTo, HistoryPred, PredApp)):
        return False
    if isinstance(a, (Star, Implies)):
        return is_pure(a.left) and is_pure(a.right)
    if isinstance(a, (Exists, Forall)):
        return is_pure(a.body)
    raise TypeError(a)


def is_relational(a: Assertion) -> bool:
    if isinstance(a, Classify):
        return True
    if isinstance(a, (Star, Implies)):
        return is_relational(a.left) or is_relational(a.right)
    if isinstance(a, (Exists, Forall)):
        return is_relational(a.body)
    return False


# ------------------------------------------------------------------- commands


@dataclass(frozen=True)
class Skip:
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Assign:
    var: str
    expr: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Load:
    var: str
    addr: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Store:
    addr: Expr
    value: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Lock:
    name: str
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Unlock:
    name: str
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Seq:
    first: "Command"
    second: "Command"
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class ParBranch:
    pre: Assertion
    post: Assertion
    body: "Command"
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Par:
    left: ParBranch
    right: ParBranch
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "Command"
    orelse: "Command"
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class While:
    cond: Expr
    invariant: Assertion
    body: "Command"
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Assume:
    """``assume(rho)``; ``by`` names a policy when the release is the policy's own."""

    formula: Assertion
    by: Optional[str] = None
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Out:
    level: Expr
    value: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class TraceCmd:
    event: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Assert:
    formula: Assertion
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Split:
    cond: Expr
    span: Optional[Span] = _span()


Command = Union[Skip, Assign, Load, Store, Lock, Unlock, Seq, Par, If, While, Assume, Out, TraceCmd, Assert, Split]


def seq(*cmds: Command) -> Command:
    """Right-nested sequence, the shape the parser produces for a block."""
    cmds = [c for c in cmds if c is not None]
    if not cmds:
        return Skip()
    acc = cmds[-1]
    for c in reversed(cmds[:-1]):
        acc = Seq(c, acc)
    return acc


# ------------------------------------------------------------------- programs


@dataclass(frozen=True)
class EventDecl:
    name: str
    arity: int
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class LockDecl:
    name: str
    invariant: Assertion
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class PredDecl:
    name: str
    params: tuple
    body: Assertion
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class PolicyDecl:
    """``when`` ~> ``release`` over trace variable ``trace_var`` and parameters."""

    name: str
    trace_var: str
    params: tuple
    when: Assertion
    release: Assertion
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Proc:
    name: str
    params: tuple
    requires: Assertion
    ensures: Assertion
    body: Command
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Program:
    lattice: "object"  # lang.lattice.Lattice
    events: tuple = ()
    locks: tuple = ()
    predicates: tuple = ()
    policies: tuple = ()
    procs: tuple = ()
    lattice_declared: bool = False
    path: str = field(default="", compare=False)

    def lock(self, name: str) -> LockDecl:
        for lk in self.locks:
            if lk.name == name:
                return lk
        raise KeyError(name)

    def policy(self, name: str) -> PolicyDecl:
        for p in self.policies:
            if p.name == name:
                return p
        raise KeyError(name)

    def proc(self, name: str) -> Proc:
        for p in self.procs:
            if p.name == name:
                return p
        raise KeyError(name)

    def predicate(self, name: str) -> PredDecl:
        for p in self.predicates:
            if p.name == name:
                return p
        raise KeyError(name)

    def event(self, name: str) -> EventDecl:
        for e in self.events:
            if e.name == name:
                return e
        raise KeyError(name)

    def lock_invariants(self) -> dict:
        return {lk.name: lk.invariant for lk in self.locks}
