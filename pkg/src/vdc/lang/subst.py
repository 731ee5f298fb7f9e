"""Capture-avoiding substitution over expressions and assertions."""

from __future__ import annotations

import itertools

from vdc.errors import SortError
from vdc.lang import syntax as S
from vdc.lang.evaluate import assertion_free_vars, free_vars
from vdc.lang.sorts import SortContext, TVar, infer_assertion, infer_expr

_HIST = object()  # mapping key standing for the ``history`` term


def subst_expr(e, m: dict):
    """Replace free variables (and ``history`` under key ``HIST``) per ``m``."""
    if not m:
        return e
    if isinstance(e, S.Var):
        return m.get(e.name, e)
    if isinstance(e, S.HistoryTerm):
        return m.get(_HIST, e)
    if isinstance(e, (S.IntLit, S.BoolLit, S.LabelLit, S.AttackerLevel, S.Nil)):
        return e
    if isinstance(e, S.Not):
        return S.Not(subst_expr(e.arg, m), span=e.span)
    if isinstance(e, S.Neg):
        return S.Neg(subst_expr(e.arg, m), span=e.span)
    if isinstance(e, S.BinOp):
        return S.BinOp(e.op, subst_expr(e.left, m), subst_expr(e.right, m), span=e.span)
    if isinstance(e, S.Ite):
        return S.Ite(subst_expr(e.cond, m), subst_expr(e.then, m), subst_expr(e.orelse, m), span=e.span)
    if isinstance(e, S.Call):
        return S.Call(e.fn, tuple(subst_expr(a, m) for a in e.args), span=e.span)
    raise TypeError(e)


HIST = _HIST


def _fresh(base: str, avoid: set) -> str:
    for i in itertools.count(1):
        cand = f"{base}_{i}"
        if cand not in avoid:
            return cand
    raise AssertionError


def _range_vars(m: dict) -> set:
    out = set()
    for k, v in m.items():
        out |= free_vars(v)
        if k is not _HIST:
            out.add(k)
    return out


def subst_assertion(a, m: dict):
    if not m:
        return a
    if isinstance(a, S.Pure):
        return S.Pure(subst_expr(a.expr, m), span=a.span)
    if isinstance(a, S.Classify):
        return S.Classify(subst_expr(a.expr, m), subst_expr(a.level, m), span=a.span)
    if isinstance(a, S.Emp):
        return a
    if isinstance(a, S.PointsTo):
        return S.PointsTo(subst_expr(a.addr, m), subst_expr(a.value, m), span=a.span)
    if isinstance(a, S.Star):
        return S.Star(subst_assertion(a.left, m), subst_assertion(a.right, m), span=a.span)
    if isinstance(a, S.Implies):
        return S.Implies(subst_assertion(a.left, m), subst_assertion(a.right, m), span=a.span)
    if isinstance(a, (S.Exists, S.Forall)):
        inner = {k: v for k, v in m.items() if k not in a.names}
        if not inner:
            return a
        captured = _range_vars(inner)
        names = []
        body = a.body
        avoid = captured | assertion_free_vars(a.body) | set(a.names)
        renames = {}
        for n in a.names:
            if n in captured:
                new = _fresh(n, avoid)
                avoid.add(new)
                renames[n] = S.Var(new)
                names.append(new)
            else:
                names.append(n)
        if renames:
            body = subst_assertion(body, renames)
        return type(a)(tuple(names), subst_assertion(body, inner), span=a.span)
    if isinstance(a, S.HistoryPred):
        return S.HistoryPred(subst_expr(a.trace, m), span=a.span)
    if isinstance(a, S.PredApp):
        return S.PredApp(a.name, tuple(subst_expr(x, m) for x in a.args), span=a.span)
    raise TypeError(a)


def subst(p, x: str, e, *, env=None, ctx: SortContext | None = None):
    """``p[x := e]`` for an assertion or expression, checking sorts agree.

    ``env`` gives known variable sorts; free variables not listed are inferred.
    """
    ctx = ctx or SortContext()
    is_assertion = isinstance(p, S.ASSERTION_TYPES)
    fv = assertion_free_vars(p) if is_assertion else free_vars(p)
    env = dict(env or {})
    for v in fv | free_vars(e) | {x}:
        env.setdefault(v, TVar())
    if is_assertion:
        infer_assertion(p, env, ctx)
    else:
        infer_expr(p, env, ctx)
    te = infer_expr(e, env, ctx)
    try:
        ctx.unify(env[x], te)
    except SortError as err:
        raise SortError(f"cannot substitute for {x!r}: {err}") from None
    m = {x: e}
    return subst_assertion(p, m) if is_assertion else subst_expr(p, m)
