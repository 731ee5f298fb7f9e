"""Forward symbolic execution producing relational verification conditions."""

from __future__ import annotations

import itertools
import re

from vdc.errors import AnnotationError, DefinitionError
from vdc.lang import syntax as S
from vdc.lang.evaluate import assertion_free_vars, free_vars
from vdc.lang.sorts import INT, SortContext, infer_expr
from vdc.lang.subst import HIST, subst_assertion, subst_expr
from vdc.parser.wellformed import annotations, assigned_vars, read_vars
from vdc.verifier.state import VC, AuditTriple, HistoryChunk, PointsToChunk, SymState

TRUE = S.Pure(S.BoolLit(True))
FALSE = S.Pure(S.BoolLit(False))
ATTACKER = S.AttackerLevel()


def _eq(a, b):
    return S.Pure(S.BinOp("==", a, b))


def program_identifiers(program: S.Program) -> set:
    names = set()
    for pr in program.procs:
        names |= set(pr.params) | assigned_vars(pr.body) | read_vars(pr.body)
        for f in [pr.requires, pr.ensures] + [a for a, _, _ in annotations(pr.body)]:
            names |= assertion_free_vars(f)
    for d in program.policies:
        names |= {d.trace_var, *d.params}
    return names


class Failure(Exception):
    """A structural proof failure on the current path."""


class Executor:
    """Symbolically executes one procedure, collecting VCs and audit triples."""

    def __init__(self, program: S.Program, proc: S.Proc, oracle=None):
        self.program = program
        self.proc = proc
        self.oracle = oracle  # callable(hyp, goal) -> bool (proved valid), may be None
        self.vcs: list = []
        self.triples: list = []
        self.avoid = program_identifiers(program)
        self._ids = itertools.count()
        self.prog_vars = set(proc.params) | assigned_vars(proc.body) | read_vars(proc.body)
        self.ctx = SortContext(events={e.name: e.arity for e in program.events}, levels=program.lattice.levels)

    # -- naming ---------------------------------------------------------------

    def fresh(self, base: str) -> str:
        base = re.sub(r"_\d+$", "", base) or "v"
        if base not in self.avoid:
            self.avoid.add(base)
            return base
        for i in itertools.count(1):
            cand = f"{base}_{i}"
            if cand not in self.avoid:
                self.avoid.add(cand)
                return cand
        raise AssertionError

    # -- VC emission ----------------------------------------------------------

    def emit(self, st: SymState, kind: str, span, goal, message: str = ""):
        vc = VC(next(self._ids), kind, span, st.path_condition(), goal, self.proc.name, message)
        self.vcs.append(vc)
        return vc

    def fail(self, st: SymState, kind: str, span, message: str):
        """Record a structural failure; it only counts if the path is feasible."""
        self.emit(st, kind, span, FALSE, message)

    def proves(self, st: SymState, goal) -> bool:
        if self.oracle is None:
            return False
        return self.oracle(st.path_condition(), goal)

    # -- symbolic terms -------------------------------------------------------

    def _map(self, st: SymState) -> dict:
        m = dict(st.store)
        h = st.history()
        if h is not None:
            m[HIST] = h.trace
        return m

    def term(self, st: SymState, e):
        return subst_expr(e, self._map(st))

    def formula(self, st: SymState, a, span=None):
        if _mentions_history_assertion(a) and st.history() is None:
            raise DefinitionError(
                f"'history' used at {span or a.span} but no History predicate is held there"
            )
        return subst_assertion(a, self._map(st))

    def cond_bool(self, e):
        """The boolean reading of a guard expression (nonzero cast for ints)."""
        env = {v: INT for v in self.prog_vars}
        try:
            srt = self.ctx.resolve(infer_expr(e, env, self.ctx, allow_history=False))
        except DefinitionError:
            srt = INT
        return S.BinOp("!=", e, S.IntLit(0)) if srt == INT else e

    def division_checks(self, st: SymState, e, span):
        for d in _divisors(e):
            if isinstance(d, S.IntLit) and d.value != 0:
                continue
            goal = S.Classify(S.BinOp("==", self.term(st, d), S.IntLit(0)), ATTACKER)
            self.emit(st, "branch-low", span, goal, "division fault must not depend on secrets")

    # -- produce / consume ----------------------------------------------------

    def produce(self, st: SymState, a) -> SymState:
        if isinstance(a, (S.Pure, S.Classify)):
            return st.assume(a)
        if isinstance(a, S.Emp):
            return st
        if isinstance(a, S.PointsTo):
            facts = []
            for c in st.chunks:
                if isinstance(c, PointsToChunk):
                    if c.addr == a.addr:
                        facts.append(FALSE)
                    elif not (isinstance(c.addr, S.IntLit) and isinstance(a.addr, S.IntLit)):
                        facts.append(S.Pure(S.BinOp("!=", a.addr, c.addr)))
            return st.with_(chunks=st.chunks + (PointsToChunk(a.addr, a.value),)).assume(*facts)
        if isinstance(a, S.HistoryPred):
            if st.history() is not None:
                return st.assume(FALSE)
            return st.with_(chunks=st.chunks + (HistoryChunk(a.trace),))
        if isinstance(a, S.PredApp):
            return self.produce(st, self.unfold(a))
        if isinstance(a, S.Star):
            return self.produce(self.produce(st, a.left), a.right)
        if isinstance(a, S.Exists):
            ren = {n: S.Var(self.fresh(n)) for n in a.names}
            return self.produce(st, subst_assertion(a.body, ren))
        if isinstance(a, (S.Implies, S.Forall)):
            if S.is_pure(a):
                return st.assume(a)
            raise AnnotationError("spatial implication or universal cannot be assumed")
        raise TypeError(a)

    def unfold(self, a: S.PredApp):
        try:
            d = self.program.predicate(a.name)
        except KeyError:
            raise DefinitionError(f"undeclared predicate {a.name!r}") from None
        return subst_assertion(d.body, dict(zip(d.params, a.args)))

    def consume(self, st: SymState, a):
        """Remove the footprint of ``a`` from ``st``.

        Returns ``(state, consumed_chunks, goal)`` where ``goal`` is the pure
        obligation left over. Raises :class:`Failure` on a missing chunk.
        """
        evars: list = []
        parts: list = []
        self._flatten(a, evars, parts)
        binding: dict = {}
        chunks = list(st.chunks)
        consumed = []
        goals = []

        def bound(x):
            return subst_expr(x, binding) if binding else x

        def unbound_in(x):
            return {v for v in free_vars(x) if v in evars and v not in binding}

        spatial = [p for p in parts if isinstance(p, (S.PointsTo, S.HistoryPred))]
        pure = [p for p in parts if not isinstance(p, (S.PointsTo, S.HistoryPred))]
        pending = list(spatial)
        progress = True
        while pending and progress:
            progress = False
            for p in list(pending):
                if isinstance(p, S.PointsTo):
                    addr = bound(p.addr)
                    if unbound_in(addr):
                        continue
                    idx = self._find_chunk(st, chunks, addr)
                    if idx is None:
                        raise Failure(f"no permission for [{_fmt(addr)}]")
                    ch = chunks.pop(idx)
                    consumed.append(ch)
                    self._match(p.value, ch.value, evars, binding, goals)
                else:
                    idx = next((i for i, c in enumerate(chunks) if isinstance(c, HistoryChunk)), None)
                    if idx is None:
                        raise Failure("History predicate not held")
                    ch = chunks.pop(idx)
                    consumed.append(ch)
                    self._match(p.trace, ch.trace, evars, binding, goals)
                pending.remove(p)
                progress = True
        if pending:
            raise Failure("cannot determine the address of a points-to assertion")
        # existentials fixed by equalities in the pure part
        changed = True
        while changed:
            changed = False
            for p in pure:
                if isinstance(p, S.Pure) and isinstance(p.expr, S.BinOp) and p.expr.op == "==":
                    for lhs, rhs in ((p.expr.left, p.expr.right), (p.expr.right, p.expr.left)):
                        if (
                            isinstance(lhs, S.Var)
                            and lhs.name in evars
                            and lhs.name not in binding
                            and not unbound_in(bound(rhs))
                        ):
                            binding[lhs.name] = bound(rhs)
                            changed = True
                            break
        goals += [subst_assertion(p, binding) for p in pure]
        left = [v for v in evars if v not in binding]
        goal = S.star(*goals) if goals else TRUE
        if left:
            goal = S.Exists(tuple(left), goal)
        return st.with_(chunks=tuple(chunks)), consumed, goal

    def _flatten(self, a, evars, parts):
        if isinstance(a, S.Star):
            self._flatten(a.left, evars, parts)
            self._flatten(a.right, evars, parts)
        elif isinstance(a, S.Exists):
            ren = {}
            for n in a.names:
                new = self.fresh(n)
                evars.append(new)
                ren[n] = S.Var(new)
            self._flatten(subst_assertion(a.body, ren), evars, parts)
        elif isinstance(a, S.PredApp):
            self._flatten(self.unfold(a), evars, parts)
        elif isinstance(a, S.Emp):
            pass
        elif isinstance(a, (S.Implies, S.Forall)) and not S.is_pure(a):
            raise AnnotationError("spatial implication or universal cannot be checked")
        else:
            parts.append(a)

    def _match(self, pattern, actual, evars, binding, goals):
        pat = subst_expr(pattern, binding) if binding else pattern
        if isinstance(pat, S.Var) and pat.name in evars and pat.name not in binding:
            binding[pat.name] = actual
        elif pat != actual:
            goals.append(_eq(pat, actual))

    def _find_chunk(self, st, chunks, addr):
        cands = [i for i, c in enumerate(chunks) if isinstance(c, PointsToChunk)]
        for i in cands:
            if chunks[i].addr == addr:
                return i
        lits = [i for i in cands if not (isinstance(addr, S.IntLit) and isinstance(chunks[i].addr, S.IntLit))]
        for i in lits:
            if self.proves(st, _eq(addr, chunks[i].addr)):
                return i
        return None

    # -- commands -------------------------------------------------------------

    def exec(self, st: SymState, c) -> list:
        """Successor states of ``c`` from ``st`` (failures end a path)."""
        try:
            return self._exec(st, c)
        except Failure as f:
            self.fail(st, f.args[1] if len(f.args) > 1 else "entailment", c.span, str(f.args[0]))
            return []

    def _exec(self, st: SymState, c) -> list:
        if isinstance(c, S.Seq):
            out = []
            for s1 in self.exec(st, c.first):
                out.extend(self.exec(s1, c.second))
            return out
        if isinstance(c, S.Skip):
            return [st]
        if isinstance(c, S.Assign):
            self.division_checks(st, c.expr, c.span)
            store = dict(st.store)
            store[c.var] = self.term(st, c.expr)
            return [st.with_(store=store)]
        if isinstance(c, (S.Load, S.Store)):
            return self._memory(st, c)
        if isinstance(c, S.Lock):
            if c.name in st.held:
                raise Failure(f"lock {c.name} acquired twice", "invariant-establish")
            inv = self.program.lock(c.name).invariant
            return [self.produce(st.with_(held=st.held | {c.name}), inv)]
        if isinstance(c, S.Unlock):
            if c.name not in st.held:
                raise Failure(f"lock {c.name} released without being held", "invariant-restore")
            inv = self.program.lock(c.name).invariant
            st2 = self._exhale(st, inv, "invariant-restore", c.span)
            return [] if st2 is None else [st2.with_(held=st.held - {c.name})]
        if isinstance(c, S.Out):
            self.division_checks(st, c.value, c.span)
            lv, val = self.term(st, c.level), self.term(st, c.value)
            self.emit(st, "output-value", c.span, S.Classify(val, lv))
            self.emit(st, "output-level", c.span, S.Classify(lv, ATTACKER))
            return [st]
        if isinstance(c, S.TraceCmd):
            self.division_checks(st, c.event, c.span)
            h = st.history()
            if h is None:
                raise Failure("trace requires the History predicate", "entailment")
            ev = self.term(st, c.event)
            chunks = tuple(HistoryChunk(S.Call("snoc", (h.trace, ev))) if ch is h else ch for ch in st.chunks)
            return [st.with_(chunks=chunks)]
        if isinstance(c, S.Assume):
            rho = self.formula(st, c.formula, c.span)
            if not S.is_pure(rho):
                raise DefinitionError("assume body must be pure")
            if c.by is None:
                self.triples.append(self.audit_triple(st, c))
            return [st.assume(rho)]
        if isinstance(c, S.Assert):
            a = self.formula(st, c.formula, c.span)
            try:
                _, _, goal = self.consume(st, a)
            except Failure as f:
                raise Failure(str(f.args[0]), "entailment") from None
            self.emit(st, "entailment", c.span, goal)
            facts = [p for p in S.conjuncts(a) if S.is_pure(p) and not isinstance(p, S.Exists)]
            return [st.assume(*facts)]
        if isinstance(c, (S.If, S.Split)):
            self.division_checks(st, c.cond, c.span)
            g = self.term(st, self.cond_bool(c.cond))
            self.emit(st, "branch-low", c.span, S.Classify(g, ATTACKER))
            pos, neg = st.assume(S.Pure(g)), st.assume(S.Pure(S.Not(g)))
            if isinstance(c, S.Split):
                return [pos, neg]
            return self.exec(pos, c.then) + self.exec(neg, c.orelse)
        if isinstance(c, S.While):
            return self._while(st, c)
        if isinstance(c, S.Par):
            return self._par(st, c)
        raise TypeError(f"cannot execute {c!r}")

    def _memory(self, st, c):
        self.division_checks(st, c.addr, c.span)
        addr = self.term(st, c.addr)
        kind = "load-address-low" if isinstance(c, S.Load) else "store-address-low"
        self.emit(st, kind, c.span, S.Classify(addr, ATTACKER))
        chunks = list(st.chunks)
        idx = self._find_chunk(st, chunks, addr)
        if idx is None:
            raise Failure(f"memory unproven: no permission for [{_fmt(addr)}]", kind)
        ch = chunks[idx]
        if isinstance(c, S.Load):
            store = dict(st.store)
            store[c.var] = ch.value
            return [st.with_(store=store)]
        self.division_checks(st, c.value, c.span)
        chunks[idx] = PointsToChunk(ch.addr, self.term(st, c.value))
        return [st.with_(chunks=tuple(chunks))]

    def _exhale(self, st, a, kind, span, leftover_ok=True):
        """Consume ``a`` (already in program vocabulary) and emit its VC."""
        try:
            st2, _, goal = self.consume(st, self.formula(st, a, span))
        except Failure as f:
            self.fail(st, kind, span, str(f.args[0]))
            return None
        self.emit(st, kind, span, goal)
        if not leftover_ok and st2.chunks:
            self.fail(st, kind, span, f"unreleased resources: {', '.join(_fmt_chunk(c) for c in st2.chunks)}")
            return None
        return st2

    def havoc(self, st: SymState, names) -> SymState:
        store = dict(st.store)
        for x in sorted(names):
            store[x] = S.Var(self.fresh(x))
        return st.with_(store=store)

    def _while(self, st, c: S.While):
        frame = self._exhale(st, c.invariant, "invariant-establish", c.span)
        if frame is None:
            return []
        mod = assigned_vars(c.body)
        head = self.havoc(frame.with_(chunks=()), mod)
        head = self.produce(head, self.formula(head, c.invariant, c.span))
        self.division_checks(head, c.cond, c.span)
        g = self.term(head, self.cond_bool(c.cond))
        self.emit(head, "branch-low", c.span, S.Classify(g, ATTACKER))
        for leaf in self.exec(head.assume(S.Pure(g)), c.body):
            if leaf.held != head.held:
                self.fail(leaf, "invariant-restore", c.span, "loop body does not preserve held locks")
                continue
            self._exhale(leaf, c.invariant, "invariant-restore", c.span, leftover_ok=False)
        exit_ = head.assume(S.Pure(S.Not(g)))
        return [exit_.with_(chunks=exit_.chunks + frame.chunks)]

    def _par(self, st, c: S.Par):
        bodies = (c.left, c.right)
        for i, j in ((0, 1), (1, 0)):
            bi, bj = bodies[i], bodies[j]
            fv = read_vars(bi.body) | assigned_vars(bi.body)
            for f in (bi.pre, bi.post):
                fv |= assertion_free_vars(f) & self.prog_vars
            for f, _, _ in annotations(bi.body):
                fv |= assertion_free_vars(f) & self.prog_vars
            clash = fv & assigned_vars(bj.body)
            if clash:
                raise Failure(
                    f"parallel branches interfere on {', '.join(sorted(clash))}", "par-split"
                )
        try:
            mid, _, g1 = self.consume(st, self.formula(st, c.left.pre, c.span))
            rest, _, g2 = self.consume(mid, self.formula(mid, c.right.pre, c.span))
        except Failure as f:
            raise Failure(str(f.args[0]), "par-split") from None
        self.emit(st, "par-split", c.span, S.star(g1, g2))
        base = st.with_(chunks=(), held=frozenset())
        for br in bodies:
            start = self.produce(base, self.formula(base, br.pre, br.span))
            for leaf in self.exec(start, br.body):
                if leaf.held:
                    self.fail(leaf, "postcondition", br.span, "parallel branch ends holding a lock")
                    continue
                self._exhale(leaf, br.post, "postcondition", br.span, leftover_ok=False)
        joined = self.havoc(rest, assigned_vars(c.left.body) | assigned_vars(c.right.body))
        joined = self.produce(joined, self.formula(joined, c.left.post, c.span))
        joined = self.produce(joined, self.formula(joined, c.right.post, c.span))
        return [joined]

    # -- audit ------------------------------------------------------------------

    def audit_triple(self, st: SymState, c: S.Assume) -> AuditTriple:
        ren, eqs = self._residue_naming(st)
        pc = [subst_assertion(p, ren) for p in st.pc] + eqs
        h = st.history()
        tr = subst_expr(h.trace, ren) if h is not None else None
        rho = c.formula if tr is None else subst_assertion(c.formula, {HIST: tr})
        P = S.star(*pc) if pc else TRUE
        return AuditTriple(P, tr, rho, c.span, self.proc.name)

    def _residue_naming(self, st: SymState):
        """Rename symbols back to program variable names where possible."""
        ren: dict = {}
        claimed: set = set()
        eqs: list = []
        identity = {x for x, v in st.store.items() if v == S.Var(x)}
        claimed |= identity
        for x in sorted(st.store):
            v = st.store[x]
            if x in identity:
                continue
            if isinstance(v, S.Var) and v.name not in ren and v.name not in identity:
                ren[v.name] = S.Var(x)
                claimed.add(x)
        # symbols carrying a program variable's name that no longer denote it
        for x in sorted(st.store):
            if x not in identity and x not in ren:
                ren[x] = S.Var(self.fresh(x + "0"))
        for x in sorted(st.store):
            v = st.store[x]
            if x in identity:
                continue
            if isinstance(v, S.Var) and ren.get(v.name) == S.Var(x):
                continue
            eqs.append(_eq(S.Var(x), subst_expr(v, ren)))
        return ren, eqs

    # -- entry point ------------------------------------------------------------

    def run(self):
        pr = self.proc
        store = {x: S.Var(x) for x in sorted(self.prog_vars)}
        st = SymState(store)
        try:
            st = self.produce(st, pr.requires)
        except AnnotationError:
            raise
        for leaf in self.exec(st, pr.body):
            if leaf.held:
                self.fail(leaf, "postcondition", pr.span, f"procedure ends holding {', '.join(sorted(leaf.held))}")
                continue
            self._exhale(leaf, pr.ensures, "postcondition", pr.span, leftover_ok=False)
        return self


def _divisors(e):
    if isinstance(e, S.BinOp):
        yield from _divisors(e.left)
        yield from _divisors(e.right)
        if e.op in ("/", "%"):
            yield e.right
    elif isinstance(e, (S.Not, S.Neg)):
        yield from _divisors(e.arg)
    elif isinstance(e, S.Ite):
        for x in (e.cond, e.then, e.orelse):
            yield from _divisors(x)
    elif isinstance(e, S.Call):
        for x in e.args:
            yield from _divisors(x)


def _mentions_history_assertion(a) -> bool:
    from vdc.lang.evaluate import mentions_history

    if isinstance(a, S.Pure):
        return mentions_history(a.expr)
    if isinstance(a, S.Classify):
        return mentions_history(a.expr) or mentions_history(a.level)
    if isinstance(a, S.PointsTo):
        return mentions_history(a.addr) or mentions_history(a.value)
    if isinstance(a, (S.Star, S.Implies)):
        return _mentions_history_assertion(a.left) or _mentions_history_assertion(a.right)
    if isinstance(a, (S.Exists, S.Forall)):
        return _mentions_history_assertion(a.body)
    if isinstance(a, S.HistoryPred):
        return mentions_history(a.trace)
    if isinstance(a, S.PredApp):
        return any(mentions_history(x) for x in a.args)
    return False


def _fmt(e) -> str:
    from vdc.parser.printer import format_formula

    return format_formula(e)


def _fmt_chunk(c) -> str:
    if isinstance(c, PointsToChunk):
        return f"[{_fmt(c.addr)}] |-> {_fmt(c.value)}"
    return f"History({_fmt(c.trace)})"
