"""Two-copy SMT-LIB encoding of pure relational entailments.

Every free variable ``x`` becomes the constants ``x$1`` and ``x$2``. Levels
are a finite datatype ordered by ``leq``, traces are snoc-lists with
recursively defined ``tr_len``/``tr_sum``/``tr_contains``/``tr_app``.
``e :: el`` becomes ``(=> (and (leq el$1 att) (leq el$2 att)) (= e$1 e$2))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from vdc.errors import CapabilityError, SortError
from vdc.lang import syntax as S
from vdc.lang.evaluate import assertion_free_vars
from vdc.lang.lattice import Lattice
from vdc.lang.sorts import BOOL, EVENT, INT, LABEL, TRACE, SortContext, TVar, infer_assertion

ATT = "att"
SMT_SORT = {INT: "Int", BOOL: "Bool", LABEL: "Label", TRACE: "Trace", EVENT: "Event"}


@dataclass(frozen=True)
class Entailment:
    """``hyp |= goal`` for every attacker level (or the pinned one)."""

    hyp: object
    goal: object
    lattice: Lattice
    sorts: tuple = ()  # sorted (name, sort) pairs for the free variables
    events: tuple = ()  # (ctor, arity)
    attacker: str | None = None
    lemmas: tuple = field(default=())

    @property
    def sort_map(self) -> dict:
        return dict(self.sorts)

    def formulas(self):
        return (*self.lemmas, self.hyp, self.goal)


def make_entailment(hyp, goal, *, lattice=None, events=(), sorts=None, attacker=None, lemmas=()) -> Entailment:
    """Build an :class:`Entailment`, inferring sorts of unlisted free variables."""
    lattice = lattice or Lattice.default()
    events = tuple(sorted(dict(events).items()))
    for a in (*lemmas, hyp, goal):
        if not S.is_pure(a):
            raise CapabilityError("entailments must be pure")
    ctx = SortContext(events=dict(events), levels=lattice.levels)
    env: dict = dict(sorts or {})
    for a in (*lemmas, hyp, goal):
        for v in assertion_free_vars(a):
            env.setdefault(v, TVar())
    for a in (*lemmas, hyp, goal):
        infer_assertion(a, env, ctx, allow_history=False)
    fv = set()
    for a in (*lemmas, hyp, goal):
        fv |= assertion_free_vars(a)
    resolved = tuple(sorted((k, ctx.resolve(v)) for k, v in env.items() if k in fv))
    if attacker is not None:
        lattice.check(attacker)
    return Entailment(hyp, goal, lattice, resolved, events, attacker, tuple(lemmas))


# ------------------------------------------------------------------ rewriting


def normalize_expr(e):
    """Unfold len/sum over explicit snoc chains and nil."""
    if isinstance(e, S.BinOp):
        return S.BinOp(e.op, normalize_expr(e.left), normalize_expr(e.right))
    if isinstance(e, S.Not):
        return S.Not(normalize_expr(e.arg))
    if isinstance(e, S.Neg):
        return S.Neg(normalize_expr(e.arg))
    if isinstance(e, S.Ite):
        return S.Ite(normalize_expr(e.cond), normalize_expr(e.then), normalize_expr(e.orelse))
    if isinstance(e, S.Call):
        args = tuple(normalize_expr(a) for a in e.args)
        if e.fn in ("len", "sum"):
            t = args[0]
            if isinstance(t, S.Nil):
                return S.IntLit(0)
            if isinstance(t, S.Call) and t.fn == "snoc":
                inner = normalize_expr(S.Call(e.fn, (t.args[0],)))
                if e.fn == "len":
                    return S.BinOp("+", inner, S.IntLit(1))
                ev = t.args[1]
                if isinstance(ev, S.Call) and ev.fn not in S.BUILTINS and len(ev.args) == 1:
                    return S.BinOp("+", inner, ev.args[0])
                return S.Call(e.fn, args)
            if isinstance(t, S.BinOp) and t.op == "++":
                return S.BinOp("+", normalize_expr(S.Call(e.fn, (t.left,))), normalize_expr(S.Call(e.fn, (t.right,))))
        return S.Call(e.fn, args)
    return e


def normalize(a):
    if isinstance(a, S.Pure):
        return S.Pure(normalize_expr(a.expr))
    if isinstance(a, S.Classify):
        return S.Classify(normalize_expr(a.expr), normalize_expr(a.level))
    if isinstance(a, (S.Star, S.Implies)):
        return type(a)(normalize(a.left), normalize(a.right))
    if isinstance(a, (S.Exists, S.Forall)):
        return type(a)(a.names, normalize(a.body))
    return a


# ------------------------------------------------------------------- encoding


def _int(n: int) -> str:
    return str(n) if n >= 0 else f"(- {-n})"


def var_name(x: str, side: int) -> str:
    return f"{x}${side}"


class Encoder:
    def __init__(self, ent: Entailment):
        self.ent = ent
        self.env = dict(ent.sort_map)
        self.events = dict(ent.events)
        self.used: set = set()
        self.len_terms: set = set()
        self._binder_sorts: list = []
        ctx = SortContext(events=self.events, levels=ent.lattice.levels)
        binders: list = []
        env = {k: v for k, v in self.env.items()}
        for f in ent.formulas():
            infer_assertion(f, env, ctx, allow_history=False, binders=binders)
        # binder sorts in pre-order, consumed by the same traversal below
        self._binder_sorts = [ctx.resolve(tv) for _, tv in binders]
        self._att = ATT if ent.attacker is None else f"L_{ent.attacker}"

    # expressions return (text, sort)
    def expr(self, e, side: int, env: dict):
        if isinstance(e, S.IntLit):
            return _int(e.value), INT
        if isinstance(e, S.BoolLit):
            return ("true" if e.value else "false"), BOOL
        if isinstance(e, S.Var):
            if e.name not in env:
                raise SortError(f"unbound variable {e.name!r}")
            return var_name(e.name, side), env[e.name]
        if isinstance(e, S.LabelLit):
            self.ent.lattice.check(e.name)
            return f"L_{e.name}", LABEL
        if isinstance(e, S.AttackerLevel):
            return self._att, LABEL
        if isinstance(e, S.Nil):
            return "nil", TRACE
        if isinstance(e, S.HistoryTerm):
            raise CapabilityError("'history' cannot appear in a solver query")
        if isinstance(e, S.Not):
            return f"(not {self.cond(e.arg, side, env)})", BOOL
        if isinstance(e, S.Neg):
            t, _ = self.expr(e.arg, side, env)
            return f"(- {t})", INT
        if isinstance(e, S.Ite):
            c = self.cond(e.cond, side, env)
            t1, s1 = self.expr(e.then, side, env)
            t2, _ = self.expr(e.orelse, side, env)
            return f"(ite {c} {t1} {t2})", s1
        if isinstance(e, S.BinOp):
            return self.binop(e, side, env)
        if isinstance(e, S.Call):
            return self.call(e, side, env)
        raise CapabilityError(f"unsupported term {e!r}")

    def cond(self, e, side, env) -> str:
        t, s = self.expr(e, side, env)
        return f"(not (= {t} 0))" if s == INT else t

    def binop(self, e, side, env):
        op = e.op
        if op in ("&&", "||"):
            a, b = self.cond(e.left, side, env), self.cond(e.right, side, env)
            return f"({'and' if op == '&&' else 'or'} {a} {b})", BOOL
        a, _ = self.expr(e.left, side, env)
        b, _ = self.expr(e.right, side, env)
        if op in ("+", "-", "*"):
            return f"({op} {a} {b})", INT
        if op == "/":
            return f"(ite (= {b} 0) 0 (div {a} {b}))", INT
        if op == "%":
            return f"(ite (= {b} 0) {a} (mod {a} {b}))", INT
        if op == "==":
            return f"(= {a} {b})", BOOL
        if op == "!=":
            return f"(not (= {a} {b}))", BOOL
        if op in ("<", "<=", ">", ">="):
            return f"({op} {a} {b})", BOOL
        if op == "++":
            self.used.add("app")
            return f"(tr_app {a} {b})", TRACE
        raise CapabilityError(f"unsupported operator {op!r}")

    def call(self, e, side, env):
        args = [self.expr(a, side, env)[0] for a in e.args]
        if e.fn == "len":
            self.used.add("len")
            self.len_terms.add(args[0])
            return f"(tr_len {args[0]})", INT
        if e.fn == "sum":
            self.used.add("sum")
            return f"(tr_sum {args[0]})", INT
        if e.fn == "contains":
            self.used.add("contains")
            return f"(tr_contains {args[0]} {args[1]})", BOOL
        if e.fn == "snoc":
            return f"(snoc {args[0]} {args[1]})", TRACE
        if e.fn not in self.events:
            raise CapabilityError(f"unknown event constructor {e.fn!r}")
        if not args:
            return f"E_{e.fn}", EVENT
        return f"(E_{e.fn} {' '.join(args)})", EVENT

    # assertions
    def assertion(self, a, env) -> str:
        if isinstance(a, S.Pure):
            return f"(and {self.cond(a.expr, 1, env)} {self.cond(a.expr, 2, env)})"
        if isinstance(a, S.Classify):
            l1, _ = self.expr(a.level, 1, env)
            l2, _ = self.expr(a.level, 2, env)
            e1, _ = self.expr(a.expr, 1, env)
            e2, _ = self.expr(a.expr, 2, env)
            return f"(=> (and (leq {l1} {self._att}) (leq {l2} {self._att})) (= {e1} {e2}))"
        if isinstance(a, S.Emp):
            return "true"
        if isinstance(a, S.Star):
            return f"(and {self.assertion(a.left, env)} {self.assertion(a.right, env)})"
        if isinstance(a, S.Implies):
            return f"(=> {self.assertion(a.left, env)} {self.assertion(a.right, env)})"
        if isinstance(a, (S.Exists, S.Forall)):
            inner = dict(env)
            decls = []
            for n in a.names:
                srt = self._binder_sorts.pop(0)
                inner[n] = srt
                decls.append(f"({var_name(n, 1)} {SMT_SORT[srt]}) ({var_name(n, 2)} {SMT_SORT[srt]})")
            q = "exists" if isinstance(a, S.Exists) else "forall"
            return f"({q} ({' '.join(decls)}) {self.assertion(a.body, inner)})"
        raise CapabilityError(f"spatial assertion {type(a).__name__} in a solver query")

    # preamble
    def preamble(self) -> list:
        lat = self.ent.lattice
        ctors = " ".join(f"(L_{lv})" for lv in lat.levels)
        evs = []
        for name, arity in sorted(self.events.items()):
            if arity:
                fields = " ".join(f"(E_{name}_{i} Int)" for i in range(arity))
                evs.append(f"(E_{name} {fields})")
            else:
                evs.append(f"(E_{name})")
        if not evs:
            evs.append("(E__none)")
        out = [
            "(set-option :produce-models true)",
            "(set-logic ALL)",
            f"(declare-datatypes ((Label 0)) (({ctors})))",
            f"(declare-datatypes ((Event 0)) (({' '.join(evs)})))",
            "(declare-datatypes ((Trace 0)) (((nil) (snoc (init Trace) (last Event)))))",
        ]
        pairs = " ".join(f"(and (= a L_{x}) (= b L_{y}))" for x, y in lat.leq_pairs())
        out.append(f"(define-fun leq ((a Label) (b Label)) Bool (or {pairs}))")
        if "len" in self.used:
            out.append(
                "(define-fun-rec tr_len ((t Trace)) Int (ite ((_ is nil) t) 0 (+ (tr_len (init t)) 1)))"
            )
        if "sum" in self.used:
            body = "0"
            for name, arity in sorted(self.events.items(), reverse=True):
                if arity >= 1:
                    body = f"(ite ((_ is E_{name}) e) (E_{name}_0 e) {body})"
            out.append(f"(define-fun ev_payload ((e Event)) Int {body})")
            out.append(
                "(define-fun-rec tr_sum ((t Trace)) Int"
                " (ite ((_ is nil) t) 0 (+ (tr_sum (init t)) (ev_payload (last t)))))"
            )
        if "contains" in self.used:
            out.append(
                "(define-fun-rec tr_contains ((t Trace) (e Event)) Bool"
                " (ite ((_ is nil) t) false (or (= (last t) e) (tr_contains (init t) e))))"
            )
        if "app" in self.used:
            out.append(
                "(define-fun-rec tr_app ((a Trace) (b Trace)) Trace"
                " (ite ((_ is nil) b) a (snoc (tr_app a (init b)) (last b))))"
            )
        return out


def encode_relational(ent: Entailment) -> str:
    """Solver input whose answer is ``unsat`` exactly when ``ent`` is valid."""
    norm = Entailment(
        normalize(ent.hyp), normalize(ent.goal), ent.lattice, ent.sorts, ent.events,
        ent.attacker, tuple(normalize(x) for x in ent.lemmas),
    )
    enc = Encoder(norm)
    env = dict(norm.sort_map)
    body = [f"(assert {enc.assertion(x, env)})" for x in norm.lemmas]
    hyp = enc.assertion(norm.hyp, env)
    goal = enc.assertion(norm.goal, env)
    lines = enc.preamble()
    for name, srt in norm.sorts:
        for side in (1, 2):
            lines.append(f"(declare-const {var_name(name, side)} {SMT_SORT[srt]})")
    if ent.attacker is None:
        lines.append(f"(declare-const {ATT} Label)")
    declared = {var_name(n, side) for n, _ in norm.sorts for side in (1, 2)}
    for t in sorted(enc.len_terms & declared):
        lines.append(f"(assert (>= (tr_len {t}) 0))")
    lines += body
    lines.append(f"(assert {hyp})")
    lines.append(f"(assert (not {goal}))")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"
