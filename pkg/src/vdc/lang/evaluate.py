"""Denotational evaluation of expressions over a store."""

from __future__ import annotations

from collections.abc import Mapping

from vdc.errors import DefinitionError, EvalFault
from vdc.lang import syntax as S
from vdc.lang.values import HISTORY_KEY, Event


def ediv(a: int, b: int) -> int:
    """Euclidean division: the remainder is always nonnegative."""
    r = a % abs(b)
    return (a - r) // b


def emod(a: int, b: int) -> int:
    return a % abs(b)


def truthy(v) -> bool:
    return bool(v)


def eval_expr(s: Mapping, e, *, total: bool = False, attacker: str | None = None):
    """Evaluate ``e`` in store ``s``.

    With ``total=False`` (program execution) division by zero raises
    :class:`EvalFault`. With ``total=True`` (assertions) ``x / 0 = 0`` and
    ``x % 0 = x``, matching the solver encoding.
    """
    ev = lambda sub: eval_expr(s, sub, total=total, attacker=attacker)  # noqa: E731

    if isinstance(e, S.IntLit):
        return e.value
    if isinstance(e, S.BoolLit):
        return e.value
    if isinstance(e, S.Var):
        try:
            return s[e.name]
        except KeyError:
            raise DefinitionError(f"unbound variable {e.name!r}") from None
    if isinstance(e, S.LabelLit):
        return e.name
    if isinstance(e, S.AttackerLevel):
        if attacker is None:
            raise DefinitionError("'attacker' used outside a relational context")
        return attacker
    if isinstance(e, S.HistoryTerm):
        try:
            return s[HISTORY_KEY]
        except KeyError:
            raise DefinitionError("'history' is not available here") from None
    if isinstance(e, S.Nil):
        return ()
    if isinstance(e, S.Not):
        return not truthy(ev(e.arg))
    if isinstance(e, S.Neg):
        return -ev(e.arg)
    if isinstance(e, S.Ite):
        return ev(e.then) if truthy(ev(e.cond)) else ev(e.orelse)
    if isinstance(e, S.BinOp):
        op = e.op
        if op == "&&":
            return truthy(ev(e.left)) and truthy(ev(e.right))
        if op == "||":
            return truthy(ev(e.left)) or truthy(ev(e.right))
        a, b = ev(e.left), ev(e.right)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op in ("/", "%"):
            if b == 0:
                if total:
                    return 0 if op == "/" else a
                raise EvalFault("division by zero")
            return ediv(a, b) if op == "/" else emod(a, b)
        if op == "==":
            return a == b
        if op == "!=":
            return a != b
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
        if op == "++":
            return tuple(a) + tuple(b)
        raise DefinitionError(f"unknown operator {op!r}")
    if isinstance(e, S.Call):
        args = [ev(a) for a in e.args]
        fn = e.fn
        if fn == "len":
            return len(args[0])
        if fn == "sum":
            total_ = 0
            for event in args[0]:
                if len(event.fields) != 1:
                    raise DefinitionError(f"sum over event {event.ctor} without a single int field")
                total_ += event.fields[0]
            return total_
        if fn == "contains":
            return args[1] in args[0]
        if fn == "snoc":
            return tuple(args[0]) + (args[1],)
        return Event(fn, tuple(args))
    raise TypeError(f"not an expression: {e!r}")


def free_vars(e) -> set:
    if isinstance(e, S.Var):
        return {e.name}
    if isinstance(e, (S.IntLit, S.BoolLit, S.LabelLit, S.AttackerLevel, S.HistoryTerm, S.Nil)):
        return set()
    if isinstance(e, (S.Not, S.Neg)):
        return free_vars(e.arg)
    if isinstance(e, S.BinOp):
        return free_vars(e.left) | free_vars(e.right)
    if isinstance(e, S.Ite):
        return free_vars(e.cond) | free_vars(e.then) | free_vars(e.orelse)
    if isinstance(e, S.Call):
        out = set()
        for a in e.args:
            out |= free_vars(a)
        return out
    raise TypeError(e)


def assertion_free_vars(a) -> set:
    if isinstance(a, S.Pure):
        return free_vars(a.expr)
    if isinstance(a, S.Classify):
        return free_vars(a.expr) | free_vars(a.level)
    if isinstance(a, S.Emp):
        return set()
    if isinstance(a, S.PointsTo):
        return free_vars(a.addr) | free_vars(a.value)
    if isinstance(a, (S.Star, S.Implies)):
        return assertion_free_vars(a.left) | assertion_free_vars(a.right)
    if isinstance(a, (S.Exists, S.Forall)):
        return assertion_free_vars(a.body) - set(a.names)
    if isinstance(a, S.HistoryPred):
        return free_vars(a.trace)
    if isinstance(a, S.PredApp):
        out = set()
        for x in a.args:
            out |= free_vars(x)
        return out
    raise TypeError(a)


def mentions_history(e) -> bool:
    if isinstance(e, S.HistoryTerm):
        return True
    if isinstance(e, (S.Not, S.Neg)):
        return mentions_history(e.arg)
    if isinstance(e, S.BinOp):
        return mentions_history(e.left) or mentions_history(e.right)
    if isinstance(e, S.Ite):
        return any(mentions_history(x) for x in (e.cond, e.then, e.orelse))
    if isinstance(e, S.Call):
        return any(mentions_history(x) for x in e.args)
    return False
