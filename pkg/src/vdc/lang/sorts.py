"""Sort inference for expressions and assertions.

Program variables are integers. Logical variables (binders, policy and
predicate parameters) get their sorts by unification; anything left
unconstrained defaults to ``int``.
"""

from __future__ import annotations

import itertools

from vdc.errors import SortError
from vdc.lang import syntax as S

INT, BOOL, LABEL, TRACE, EVENT = "int", "bool", "label", "trace", "event"
SORTS = (INT, BOOL, LABEL, TRACE, EVENT)

_ids = itertools.count()


class TVar:
    __slots__ = ("id",)

    def __init__(self):
        self.id = next(_ids)

    def __repr__(self):
        return f"?{self.id}"


class SortContext:
    """Holds the unifier plus the program's event and predicate signatures."""

    def __init__(self, events=None, predicates=None, levels=()):
        self.events = dict(events or {})  # ctor -> arity
        self.predicates = dict(predicates or {})  # name -> tuple of sorts
        self.levels = set(levels)
        self._parent: dict = {}

    def find(self, t):
        while isinstance(t, TVar) and t in self._parent:
            t = self._parent[t]
        return t

    def unify(self, a, b, node=None):
        a, b = self.find(a), self.find(b)
        if a is b or a == b:
            return a
        if isinstance(a, TVar):
            self._parent[a] = b
            return b
        if isinstance(b, TVar):
            self._parent[b] = a
            return a
        where = f" at {node.span}" if getattr(node, "span", None) else ""
        raise SortError(f"sort mismatch: expected {a}, found {b}{where}")

    def resolve(self, t, default=INT):
        t = self.find(t)
        return default if isinstance(t, TVar) else t


def _cond(ctx, t, node):
    # ints are cast (nonzero is true); an unresolved variable is left open so
    # a later use can still fix it to int
    t = ctx.find(t)
    if t in (INT, BOOL) or isinstance(t, TVar):
        return
    ctx.unify(t, BOOL, node)


def infer_expr(e, env: dict, ctx: SortContext, *, allow_history=True):
    r = lambda x: infer_expr(x, env, ctx, allow_history=allow_history)  # noqa: E731
    if isinstance(e, S.IntLit):
        return INT
    if isinstance(e, S.BoolLit):
        return BOOL
    if isinstance(e, S.Var):
        if e.name not in env:
            raise SortError(f"unbound variable {e.name!r}" + (f" at {e.span}" if e.span else ""))
        return env[e.name]
    if isinstance(e, S.LabelLit):
        if ctx.levels and e.name not in ctx.levels:
            raise SortError(f"undeclared security level {e.name!r}")
        return LABEL
    if isinstance(e, S.AttackerLevel):
        return LABEL
    if isinstance(e, S.HistoryTerm):
        if not allow_history:
            raise SortError("'history' may only appear in annotations" + (f" at {e.span}" if e.span else ""))
        return TRACE
    if isinstance(e, S.Nil):
        return TRACE
    if isinstance(e, S.Not):
        _cond(ctx, r(e.arg), e)
        return BOOL
    if isinstance(e, S.Neg):
        ctx.unify(r(e.arg), INT, e)
        return INT
    if isinstance(e, S.Ite):
        _cond(ctx, r(e.cond), e)
        return ctx.unify(r(e.then), r(e.orelse), e)
    if isinstance(e, S.BinOp):
        lt, rt = r(e.left), r(e.right)
        if e.op in S.ARITH_OPS:
            ctx.unify(lt, INT, e.left)
            ctx.unify(rt, INT, e.right)
            return INT
        if e.op in S.CMP_OPS:
            ctx.unify(lt, INT, e.left)
            ctx.unify(rt, INT, e.right)
            return BOOL
        if e.op in S.EQ_OPS:
            ctx.unify(lt, rt, e)
            return BOOL
        if e.op in S.BOOL_OPS:
            _cond(ctx, lt, e.left)
            _cond(ctx, rt, e.right)
            return BOOL
        if e.op == "++":
            ctx.unify(lt, TRACE, e.left)
            ctx.unify(rt, TRACE, e.right)
            return TRACE
        raise SortError(f"unknown operator {e.op!r}")
    if isinstance(e, S.Call):
        args = [r(a) for a in e.args]
        if e.fn in S.BUILTINS:
            if len(args) != S.BUILTINS[e.fn]:
                raise SortError(f"{e.fn} expects {S.BUILTINS[e.fn]} argument(s)")
            ctx.unify(args[0], TRACE, e)
            if e.fn in ("len", "sum"):
                return INT
            ctx.unify(args[1], EVENT, e)
            return BOOL if e.fn == "contains" else TRACE
        if e.fn not in ctx.events:
            raise SortError(f"undeclared event constructor {e.fn!r}" + (f" at {e.span}" if e.span else ""))
        if len(args) != ctx.events[e.fn]:
            raise SortError(f"event {e.fn} expects {ctx.events[e.fn]} field(s), got {len(args)}")
        for a, node in zip(args, e.args):
            ctx.unify(a, INT, node)
        return EVENT
    raise TypeError(f"not an expression: {e!r}")


def infer_assertion(a, env: dict, ctx: SortContext, *, allow_history=True, binders=None):
    """Sort-check ``a``; ``binders`` (if given) collects sorts of bound names."""
    r = lambda x, env=env: infer_assertion(x, env, ctx, allow_history=allow_history, binders=binders)  # noqa: E731
    ex = lambda x: infer_expr(x, env, ctx, allow_history=allow_history)  # noqa: E731
    if isinstance(a, S.Pure):
        ctx.unify(ex(a.expr), BOOL, a)
    elif isinstance(a, S.Classify):
        ex(a.expr)
        ctx.unify(ex(a.level), LABEL, a.level)
    elif isinstance(a, S.Emp):
        pass
    elif isinstance(a, S.PointsTo):
        ctx.unify(ex(a.addr), INT, a.addr)
        ctx.unify(ex(a.value), INT, a.value)
    elif isinstance(a, (S.Star, S.Implies)):
        r(a.left)
        r(a.right)
    elif isinstance(a, (S.Exists, S.Forall)):
        inner = dict(env)
        for n in a.names:
            tv = TVar()
            inner[n] = tv
            if binders is not None:
                binders.append((n, tv))
        r(a.body, inner)
    elif isinstance(a, S.HistoryPred):
        ctx.unify(ex(a.trace), TRACE, a)
    elif isinstance(a, S.PredApp):
        if a.name not in ctx.predicates:
            raise SortError(f"undeclared predicate {a.name!r}")
        sig = ctx.predicates[a.name]
        if len(sig) != len(a.args):
            raise SortError(f"predicate {a.name} expects {len(sig)} argument(s)")
        for s_, arg in zip(sig, a.args):
            ctx.unify(ex(arg), s_, arg)
    else:
        raise TypeError(f"not an assertion: {a!r}")


def expr_sort(e, env: dict, ctx: SortContext | None = None):
    ctx = ctx or SortContext()
    return ctx.resolve(infer_expr(e, env, ctx))


def infer_free_sorts(formulas, known: dict, ctx: SortContext | None = None) -> dict:
    """Sorts for every free variable in ``formulas`` (assertions), given ``known`` ones."""
    from vdc.lang.evaluate import assertion_free_vars

    ctx = ctx or SortContext()
    env = dict(known)
    for f in formulas:
        for v in assertion_free_vars(f):
            if v not in env:
                env[v] = TVar()
    for f in formulas:
        infer_assertion(f, env, ctx)
    return {k: ctx.resolve(v) for k, v in env.items()}
