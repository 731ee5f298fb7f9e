"""Recursive-descent parser for ``.vdc`` files.

Expressions and assertions share one Pratt parser: ``&&`` between two plain
expressions stays a boolean conjunction, and becomes a separating
conjunction as soon as either side is spatial or relational (the two agree
on pure formulas). ``==>`` is always the assertion-level implication.
"""

from __future__ import annotations

from vdc.errors import DefinitionError, ParseError
from vdc.lang import syntax as S
from vdc.lang.lattice import Lattice
from vdc.parser.diagnostics import Diagnostic
from vdc.parser.lexer import Token, tokenize

# binding powers
BP_IMPLIES, BP_TERNARY, BP_OR, BP_AND, BP_CLASSIFY, BP_CMP, BP_CONCAT, BP_ADD, BP_MUL, BP_UNARY = range(1, 11)

INFIX = {
    "==>": BP_IMPLIES,
    "?": BP_TERNARY,
    "||": BP_OR,
    "&&": BP_AND,
    "::": BP_CLASSIFY,
    "==": BP_CMP, "!=": BP_CMP, "<": BP_CMP, "<=": BP_CMP, ">": BP_CMP, ">=": BP_CMP,
    "++": BP_CONCAT,
    "+": BP_ADD, "-": BP_ADD,
    "*": BP_MUL, "/": BP_MUL, "%": BP_MUL, "mod": BP_MUL,
}


def _is_expr(x) -> bool:
    return not isinstance(x, S.ASSERTION_TYPES)


def _as_assertion(x):
    return S.Pure(x, span=x.span) if _is_expr(x) else x


def _join(a: S.Span, b: S.Span) -> S.Span:
    return S.Span(a.line, a.col, b.end_line, b.end_col, a.path)


class Parser:
    def __init__(self, text: str, path: str = ""):
        self.path = path
        self.toks = tokenize(text, path)
        self.i = 0
        self.in_assume = False
        self._prescan()

    # -- token helpers ------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        raise ParseError([Diagnostic("error", msg, tok.span)])

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("kw", "punct")

    def accept(self, text: str) -> Token | None:
        if self.at(text):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            found = self.tok.text or "end of input"
            self.error(f"expected identifier, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def span_from(self, start: Token) -> S.Span:
        return _join(start.span, self.toks[max(self.i - 1, 0)].span)

    def _prescan(self):
        self.predicates = set()
        self.events = set()
        self.levels = {"low", "high"}
        toks = self.toks
        for k, t in enumerate(toks[:-1]):
            nxt = toks[k + 1]
            if t.kind == "kw" and t.text == "predicate" and nxt.kind == "ident":
                self.predicates.add(nxt.text)
            elif t.kind == "kw" and t.text == "event" and nxt.kind == "ident":
                self.events.add(nxt.text)
            elif t.kind == "kw" and t.text == "lattice" and nxt.text == "{":
                names = set()
                j = k + 2
                while j < len(toks) and toks[j].text not in (";", "}"):
                    if toks[j].kind == "ident":
                        names.add(toks[j].text)
                    j += 1
                self.levels = names

    # -- expressions and assertions ----------------------------------------

    def parse_formula(self, rbp: int = 0):
        start = self.tok
        left = self.nud()
        while True:
            t = self.tok
            op = t.text if t.kind in ("punct", "kw") else None
            bp = INFIX.get(op) if op else None
            if bp is None or bp <= rbp:
                break
            self.i += 1
            left = self.led(op, left, bp, start)
        return left

    def expr(self, rbp: int = 0):
        t = self.tok
        x = self.parse_formula(rbp)
        if not _is_expr(x):
            self.error("assertion not allowed in an expression", t)
        return x

    def assertion(self):
        return _as_assertion(self.parse_formula(0))

    def led(self, op, left, bp, start):
        if op == "==>":
            right = self.parse_formula(bp - 1)
            return S.Implies(_as_assertion(left), _as_assertion(right), span=self.span_from(start))
        if op == "?":
            self._need_expr(left, start, "condition")
            then = self.expr(BP_TERNARY)
            self.expect(":")
            orelse = self.expr(BP_TERNARY - 1)
            return S.Ite(left, then, orelse, span=self.span_from(start))
        if op == "::":
            self._need_expr(left, start, "classified term")
            level = self.expr(BP_UNARY)
            return S.Classify(left, level, span=self.span_from(start))
        if op == "&&":
            right = self.parse_formula(bp)
            sp = self.span_from(start)
            if _is_expr(left) and _is_expr(right):
                return S.BinOp("&&", left, right, span=sp)
            return S.Star(_as_assertion(left), _as_assertion(right), span=sp)
        # plain binary expression operator
        self._need_expr(left, start, f"operand of {op!r}")
        rt = self.tok
        right = self.parse_formula(bp)
        if not _is_expr(right):
            self.error(f"assertion not allowed as operand of {op!r}", rt)
        if op == "mod":
            op = "%"
        return S.BinOp(op, left, right, span=self.span_from(start))

    def _need_expr(self, x, tok, what):
        if not _is_expr(x):
            self.error(f"{what} must be an expression, not an assertion", tok)

    def nud(self):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return S.IntLit(int(t.text), span=t.span)
        if t.kind == "kw":
            kw = t.text
            if kw in ("true", "false"):
                self.i += 1
                return S.BoolLit(kw == "true", span=t.span)
            if kw == "nil":
                self.i += 1
                return S.Nil(span=t.span)
            if kw == "attacker":
                self.i += 1
                return S.AttackerLevel(span=t.span)
            if kw == "history":
                self.i += 1
                return S.HistoryTerm(span=t.span)
            if kw == "emp":
                self.i += 1
                return S.Emp(span=t.span)
            if kw == "History":
                self.i += 1
                self.expect("(")
                tr = self.expr()
                self.expect(")")
                return S.HistoryPred(tr, span=self.span_from(t))
            if kw in ("exists", "forall"):
                self.i += 1
                names = [self.ident().text]
                while self.accept(","):
                    names.append(self.ident().text)
                self.expect(".")
                body = _as_assertion(self.parse_formula(0))
                cls = S.Exists if kw == "exists" else S.Forall
                return cls(tuple(names), body, span=self.span_from(t))
            self.error(f"unexpected keyword {kw!r}")
        if t.kind == "punct":
            if t.text == "(":
                self.i += 1
                inner = self.parse_formula(0)
                self.expect(")")
                return inner
            if t.text == "!":
                self.i += 1
                arg = self.expr(BP_UNARY)
                return S.Not(arg, span=self.span_from(t))
            if t.text == "-":
                self.i += 1
                arg = self.expr(BP_UNARY)
                return S.Neg(arg, span=self.span_from(t))
            if t.text == "[":
                if self.in_assume:
                    self.error("assume body must be pure", t)
                self.i += 1
                addr = self.expr()
                self.expect("]")
                self.expect("|->")
                val = self.expr(BP_CLASSIFY)
                return S.PointsTo(addr, val, span=self.span_from(t))
            self.error(f"unexpected {t.text!r}")
        if t.kind == "ident":
            self.i += 1
            name = t.text
            if self.at("("):
                self.i += 1
                args = []
                if not self.at(")"):
                    args.append(self.expr())
                    while self.accept(","):
                        args.append(self.expr())
                self.expect(")")
                sp = self.span_from(t)
                if name in self.predicates:
                    return S.PredApp(name, tuple(args), span=sp)
                if name in S.BUILTINS or name in self.events:
                    return S.Call(name, tuple(args), span=sp)
                self.error(f"unknown function or event {name!r}", t)
            if name in self.levels:
                return S.LabelLit(name, span=t.span)
            return S.Var(name, span=t.span)
        self.error("unexpected end of input" if t.kind == "eof" else f"unexpected {t.text!r}")

    # -- commands ------------------------------------------------------------

    def block(self):
        self.expect("{")
        cmds = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("unterminated block")
            cmds.append(self.stmt())
        self.expect("}")
        return S.seq(*cmds)

    def stmt(self):
        t = self.tok
        if self.at("{"):
            return self.block()
        if t.kind == "ident":
            self.i += 1
            self.expect(":=")
            e = self.expr()
            self.expect(";")
            return S.Assign(t.text, e, span=self.span_from(t))
        if t.kind != "kw":
            self.error(f"expected a statement, found {t.text or 'end of input'!r}")
        kw = t.text
        self.i += 1
        if kw == "skip":
            self.expect(";")
            return S.Skip(span=self.span_from(t))
        if kw == "load":
            x = self.ident().text
            self.expect("<-")
            self.expect("[")
            a = self.expr()
            self.expect("]")
            self.expect(";")
            return S.Load(x, a, span=self.span_from(t))
        if kw == "store":
            self.expect("[")
            a = self.expr()
            self.expect("]")
            self.expect("<-")
            v = self.expr()
            self.expect(";")
            return S.Store(a, v, span=self.span_from(t))
        if kw in ("lock", "unlock"):
            name = self.ident().text
            self.expect(";")
            cls = S.Lock if kw == "lock" else S.Unlock
            return cls(name, span=self.span_from(t))
        if kw == "out":
            self.expect("[")
            lvl = self.expr()
            self.expect("]")
            self.expect("(")
            v = self.expr()
            self.expect(")")
            self.expect(";")
            return S.Out(lvl, v, span=self.span_from(t))
        if kw in ("assume", "assert"):
            self.expect("(")
            ft = self.tok
            self.in_assume = kw == "assume"
            try:
                f = self.assertion()
            finally:
                self.in_assume = False
            self.expect(")")
            by = None
            if kw == "assume" and self.accept("by"):
                by = self.ident().text
            self.expect(";")
            if kw == "assume":
                if not S.is_pure(f):
                    self.error("assume body must be pure", ft)
                return S.Assume(f, by, span=self.span_from(t))
            return S.Assert(f, span=self.span_from(t))
        if kw == "split":
            self.expect("(")
            e = self.expr()
            self.expect(")")
            self.expect(";")
            return S.Split(e, span=self.span_from(t))
        if kw == "trace":
            self.expect("(")
            e = self.expr()
            self.expect(")")
            self.expect(";")
            return S.TraceCmd(e, span=self.span_from(t))
        if kw == "if":
            self.expect("(")
            c = self.expr()
            self.expect(")")
            then = self.block()
            orelse = S.Skip()
            if self.accept("else"):
                orelse = self.stmt() if self.at("if") else self.block()
            return S.If(c, then, orelse, span=self.span_from(t))
        if kw == "while":
            self.expect("(")
            c = self.expr()
            self.expect(")")
            self.expect("invariant")
            self.expect("(")
            inv = self.assertion()
            self.expect(")")
            body = self.block()
            return S.While(c, inv, body, span=self.span_from(t))
        if kw == "par":
            left = self.par_branch()
            right = self.par_branch()
            return S.Par(left, right, span=self.span_from(t))
        self.error(f"unexpected keyword {kw!r} at start of statement", t)

    def par_branch(self):
        t = self.expect("{")
        self.expect("requires")
        self.expect(":")
        pre = self.assertion()
        self.expect("ensures")
        self.expect(":")
        post = self.assertion()
        body = self.block()
        self.expect("}")
        return S.ParBranch(pre, post, body, span=self.span_from(t))

    # -- top level -----------------------------------------------------------

    def program(self) -> S.Program:
        lattice = None
        events, locks, preds, policies, procs = [], [], [], [], []
        while self.tok.kind != "eof":
            t = self.tok
            if self.at("lattice"):
                if lattice is not None:
                    self.error("duplicate lattice declaration")
                lattice = self.lattice_decl()
            elif self.at("event"):
                events.append(self.event_decl())
            elif self.at("lock"):
                locks.append(self.lock_decl())
            elif self.at("predicate"):
                preds.append(self.pred_decl())
            elif self.at("policy"):
                policies.append(self.policy_decl())
            elif self.at("proc"):
                procs.append(self.proc_decl())
            else:
                self.error(f"expected a declaration, found {t.text!r}")
        if not procs:
            self.error("program declares no procedure")
        declared = lattice is not None
        if lattice is None:
            lattice = Lattice.default()
        return S.Program(
            lattice=lattice,
            events=tuple(events),
            locks=tuple(locks),
            predicates=tuple(preds),
            policies=tuple(policies),
            procs=tuple(procs),
            lattice_declared=declared,
            path=self.path,
        )

    def lattice_decl(self):
        t = self.expect("lattice")
        self.expect("{")
        names = [self.ident().text]
        while self.accept(","):
            names.append(self.ident().text)
        self.expect(";")
        self.expect("order")
        self.expect(":")
        order = []
        while True:
            a = self.ident().text
            self.expect("<")
            b = self.ident().text
            order.append((a, b))
            if not self.accept(","):
                break
        self.accept(";")
        self.expect("}")
        try:
            return Lattice.build(names, order)
        except DefinitionError as err:
            raise ParseError([Diagnostic("error", str(err), self.span_from(t))]) from None

    def event_decl(self):
        t = self.expect("event")
        name = self.ident().text
        self.expect("(")
        arity = 0
        if not self.at(")"):
            self.expect("int")
            arity = 1
            while self.accept(","):
                self.expect("int")
                arity += 1
        self.expect(")")
        self.expect(";")
        return S.EventDecl(name, arity, span=self.span_from(t))

    def lock_decl(self):
        t = self.expect("lock")
        name = self.ident().text
        self.expect("invariant")
        self.expect(":")
        inv = self.assertion()
        self.expect(";")
        return S.LockDecl(name, inv, span=self.span_from(t))

    def pred_decl(self):
        t = self.expect("predicate")
        name = self.ident().text
        params = self.params()
        self.expect("=")
        body = self.assertion()
        self.expect(";")
        return S.PredDecl(name, params, body, span=self.span_from(t))

    def policy_decl(self):
        t = self.expect("policy")
        name = self.ident().text
        params = self.params()
        if not params:
            self.error("policy needs a trace parameter", t)
        self.expect("{")
        self.expect("when")
        self.expect(":")
        when = self.assertion()
        self.expect(";")
        self.expect("release")
        self.expect(":")
        release = self.assertion()
        self.expect(";")
        self.expect("}")
        return S.PolicyDecl(name, params[0], params[1:], when, release, span=self.span_from(t))

    def proc_decl(self):
        t = self.expect("proc")
        name = self.ident().text
        params = self.params()
        self.expect("requires")
        self.expect(":")
        pre = self.assertion()
        self.expect("ensures")
        self.expect(":")
        post = self.assertion()
        body = self.block()
        return S.Proc(name, params, pre, post, body, span=self.span_from(t))

    def params(self):
        self.expect("(")
        out = []
        if not self.at(")"):
            out.append(self.ident().text)
            while self.accept(","):
                out.append(self.ident().text)
        self.expect(")")
        return tuple(out)


def parse_assertion_text(text: str, program: S.Program | None = None):
    p = Parser(text)
    if program is not None:
        p.events |= {e.name for e in program.events}
        p.predicates |= {q.name for q in program.predicates}
        p.levels = set(program.lattice.levels)
    a = p.assertion()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r} after assertion")
    return a


def parse_expr_text(text: str, program: S.Program | None = None):
    p = Parser(text)
    if program is not None:
        p.events |= {e.name for e in program.events}
        p.levels = set(program.lattice.levels)
    e = p.expr()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r} after expression")
    return e
