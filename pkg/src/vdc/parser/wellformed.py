"""Post-parse checks: sorts, declared names, annotation restrictions."""

from __future__ import annotations

from vdc.errors import DefinitionError, SortError
from vdc.lang import syntax as S
from vdc.lang.evaluate import assertion_free_vars, free_vars
from vdc.lang.sorts import BOOL, EVENT, INT, LABEL, TRACE, SortContext, TVar, infer_assertion, infer_expr
from vdc.parser.diagnostics import Diagnostic

_NOWHERE = S.Span(1, 1, 1, 1)


def assigned_vars(c) -> set:
    """Variables a command may modify (``mod(c)``)."""
    if isinstance(c, (S.Assign, S.Load)):
        return {c.var}
    if isinstance(c, S.Seq):
        return assigned_vars(c.first) | assigned_vars(c.second)
    if isinstance(c, S.If):
        return assigned_vars(c.then) | assigned_vars(c.orelse)
    if isinstance(c, S.While):
        return assigned_vars(c.body)
    if isinstance(c, S.Par):
        return assigned_vars(c.left.body) | assigned_vars(c.right.body)
    return set()


def command_exprs(c):
    """Yield every executable (non-annotation) expression in ``c``."""
    if isinstance(c, S.Assign):
        yield c.expr
    elif isinstance(c, S.Load):
        yield c.addr
    elif isinstance(c, S.Store):
        yield c.addr
        yield c.value
    elif isinstance(c, S.Out):
        yield c.level
        yield c.value
    elif isinstance(c, S.TraceCmd):
        yield c.event
    elif isinstance(c, (S.If, S.While, S.Split)):
        yield c.cond
    for sub in sub_commands(c):
        yield from command_exprs(sub)


def read_vars(c) -> set:
    out = set()
    for e in command_exprs(c):
        out |= free_vars(e)
    return out


def sub_commands(c):
    if isinstance(c, S.Seq):
        return (c.first, c.second)
    if isinstance(c, S.If):
        return (c.then, c.orelse)
    if isinstance(c, S.While):
        return (c.body,)
    if isinstance(c, S.Par):
        return (c.left.body, c.right.body)
    return ()


def walk_commands(c):
    yield c
    for sub in sub_commands(c):
        yield from walk_commands(sub)


def annotations(c):
    """(formula, history-allowed) for every annotation inside ``c``."""
    for node in walk_commands(c):
        if isinstance(node, (S.Assume, S.Assert)):
            yield node.formula, True, node
        elif isinstance(node, S.While):
            yield node.invariant, False, node
        elif isinstance(node, S.Par):
            for br in (node.left, node.right):
                yield br.pre, False, br
                yield br.post, False, br


def _uses_sum(x) -> bool:
    if isinstance(x, S.Call):
        return x.fn == "sum" or any(_uses_sum(a) for a in x.args)
    if isinstance(x, (S.Not, S.Neg)):
        return _uses_sum(x.arg)
    if isinstance(x, S.BinOp):
        return _uses_sum(x.left) or _uses_sum(x.right)
    if isinstance(x, S.Ite):
        return any(_uses_sum(y) for y in (x.cond, x.then, x.orelse))
    if isinstance(x, (S.Pure,)):
        return _uses_sum(x.expr)
    if isinstance(x, S.Classify):
        return _uses_sum(x.expr) or _uses_sum(x.level)
    if isinstance(x, S.PointsTo):
        return _uses_sum(x.addr) or _uses_sum(x.value)
    if isinstance(x, (S.Star, S.Implies)):
        return _uses_sum(x.left) or _uses_sum(x.right)
    if isinstance(x, (S.Exists, S.Forall)):
        return _uses_sum(x.body)
    if isinstance(x, S.HistoryPred):
        return _uses_sum(x.trace)
    if isinstance(x, S.PredApp):
        return any(_uses_sum(a) for a in x.args)
    return False


def _mentions_attacker(e) -> bool:
    if isinstance(e, S.AttackerLevel):
        return True
    if isinstance(e, (S.Not, S.Neg)):
        return _mentions_attacker(e.arg)
    if isinstance(e, S.BinOp):
        return _mentions_attacker(e.left) or _mentions_attacker(e.right)
    if isinstance(e, S.Ite):
        return any(_mentions_attacker(y) for y in (e.cond, e.then, e.orelse))
    if isinstance(e, S.Call):
        return any(_mentions_attacker(a) for a in e.args)
    return False


class Checker:
    def __init__(self, program: S.Program):
        self.p = program
        self.diags: list = []
        self.ctx = SortContext(
            events={e.name: e.arity for e in program.events},
            levels=program.lattice.levels,
        )

    def err(self, msg, node=None, fallback=None):
        span = getattr(node, "span", None) or getattr(fallback, "span", None) or _NOWHERE
        self.diags.append(Diagnostic("error", msg, span))

    def guard(self, fn, node, fallback=None):
        try:
            fn()
        except DefinitionError as e:
            self.err(str(e), node, fallback)

    def run(self) -> list:
        p = self.p
        self.unique("event", p.events)
        self.unique("lock", p.locks)
        self.unique("predicate", p.predicates)
        self.unique("policy", p.policies)
        self.unique("procedure", p.procs)
        for e in p.events:
            if e.name in S.BUILTINS:
                self.err(f"event name {e.name!r} clashes with a built-in", e)
        for q in p.predicates:
            self.predicate(q)
        for lk in p.locks:
            self.closed(lk.invariant, f"invariant of lock {lk.name}", lk)
        for d in p.policies:
            self.policy(d)
        for pr in p.procs:
            self.proc(pr)
        formulas = [lk.invariant for lk in p.locks] + [q.body for q in p.predicates]
        formulas += [d.when for d in p.policies] + [d.release for d in p.policies]
        for pr in p.procs:
            formulas += [pr.requires, pr.ensures] + [f for f, _, _ in annotations(pr.body)]
            formulas += list(command_exprs(pr.body))
        if any(_uses_sum(f) for f in formulas):
            bad = [e.name for e in p.events if e.arity != 1]
            if bad:
                self.err(f"'sum' needs every event to carry one int field; {', '.join(bad)} does not", p.events[0])
        return self.diags

    def unique(self, what, decls):
        seen = set()
        for d in decls:
            if d.name in seen:
                self.err(f"duplicate {what} {d.name!r}", d)
            seen.add(d.name)

    def predicate(self, q: S.PredDecl):
        env = {x: TVar() for x in q.params}

        def go():
            extra = assertion_free_vars(q.body) - set(q.params)
            if extra:
                raise DefinitionError(f"predicate {q.name} mentions unbound {', '.join(sorted(extra))}")
            infer_assertion(q.body, env, self.ctx, allow_history=False)

        self.guard(go, q)
        self.ctx.predicates[q.name] = tuple(self.ctx.resolve(env[x]) for x in q.params)

    def closed(self, a, what, node):
        fv = assertion_free_vars(a)
        if fv:
            self.err(f"{what} must be closed; free: {', '.join(sorted(fv))}", node)
            return
        self.guard(lambda: infer_assertion(a, {}, self.ctx, allow_history=False), node)

    def policy(self, d: S.PolicyDecl):
        allowed = {d.trace_var, *d.params}
        for part, what in ((d.when, "when"), (d.release, "release")):
            extra = assertion_free_vars(part) - allowed
            if extra:
                self.err(f"policy {d.name}: {what}-formula mentions {', '.join(sorted(extra))}", part, d)
            if not S.is_pure(part):
                self.err(f"policy {d.name}: {what}-formula must be pure", part, d)
        if S.is_relational(d.when):
            self.err(f"policy {d.name}: when-formula must not classify", d.when, d)
        env = {d.trace_var: TRACE, **{x: TVar() for x in d.params}}
        for part in (d.when, d.release):
            self.guard(lambda part=part: infer_assertion(part, env, self.ctx, allow_history=False), part, d)

    def proc(self, pr: S.Proc):
        prog_vars = set(pr.params) | assigned_vars(pr.body)
        for node in walk_commands(pr.body):
            if isinstance(node, (S.Lock, S.Unlock)):
                try:
                    self.p.lock(node.name)
                except KeyError:
                    self.err(f"undeclared lock {node.name!r}", node, pr)
            elif isinstance(node, S.Assume):
                if not S.is_pure(node.formula):
                    self.err("assume body must be pure", node.formula, node)
                if node.by is not None:
                    try:
                        self.p.policy(node.by)
                    except KeyError:
                        self.err(f"unknown policy {node.by!r}", node)
        undeclared = read_vars(pr.body) - prog_vars
        for v in sorted(undeclared):
            self.err(f"variable {v!r} is read but never assigned and is not a parameter", pr)
        for e in command_exprs(pr.body):
            if _mentions_attacker(e):
                self.err("'attacker' may only appear in annotations", e, pr)

        env = {v: INT for v in prog_vars}
        ann = [pr.requires, pr.ensures] + [f for f, _, _ in annotations(pr.body)]
        for f in ann:
            for v in assertion_free_vars(f):
                env.setdefault(v, TVar())
        self.guard(lambda: infer_assertion(pr.requires, env, self.ctx, allow_history=False), pr.requires, pr)
        self.guard(lambda: infer_assertion(pr.ensures, env, self.ctx, allow_history=False), pr.ensures, pr)
        for f, hist, node in annotations(pr.body):
            self.guard(lambda f=f, hist=hist: infer_assertion(f, env, self.ctx, allow_history=hist), f, node)
        for node in walk_commands(pr.body):
            self.guard(lambda node=node: self.command_sorts(node, env), node, pr)

    def command_sorts(self, c, env):
        ex = lambda e: infer_expr(e, env, self.ctx, allow_history=False)  # noqa: E731
        ctx = self.ctx

        def scalar(e):
            t = ctx.find(ex(e))
            if t not in (INT, BOOL):
                ctx.unify(t, INT, e)

        if isinstance(c, S.Assign):
            scalar(c.expr)
        elif isinstance(c, S.Load):
            ctx.unify(ex(c.addr), INT, c.addr)
        elif isinstance(c, S.Store):
            ctx.unify(ex(c.addr), INT, c.addr)
            scalar(c.value)
        elif isinstance(c, S.Out):
            ctx.unify(ex(c.level), LABEL, c.level)
            scalar(c.value)
        elif isinstance(c, S.TraceCmd):
            ctx.unify(ex(c.event), EVENT, c.event)
        elif isinstance(c, (S.If, S.While, S.Split)):
            scalar(c.cond)


def check_program(program: S.Program) -> list:
    """Return the list of error diagnostics (empty when well-formed)."""
    try:
        return Checker(program).run()
    except SortError as e:  # pragma: no cover - guard() catches these
        return [Diagnostic("error", str(e), _NOWHERE)]


def program_var_sorts(program: S.Program, pr: S.Proc) -> dict:
    """Resolved sorts of every variable visible in ``pr`` (program and logical)."""
    ctx = sort_context(program)
    env = {v: INT for v in set(pr.params) | assigned_vars(pr.body)}
    ann = [pr.requires, pr.ensures] + [f for f, _, _ in annotations(pr.body)]
    for f in ann:
        for v in assertion_free_vars(f):
            env.setdefault(v, TVar())
    for f in ann:
        infer_assertion(f, env, ctx)
    return {k: ctx.resolve(v) for k, v in env.items()}


def sort_context(program: S.Program) -> SortContext:
    ctx = SortContext(events={e.name: e.arity for e in program.events}, levels=program.lattice.levels)
    for q in program.predicates:
        env = {x: TVar() for x in q.params}
        infer_assertion(q.body, env, ctx)
        ctx.predicates[q.name] = tuple(ctx.resolve(env[x]) for x in q.params)
    return ctx
