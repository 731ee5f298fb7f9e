"""Canonical pretty-printer; its output reparses to an equal tree."""

from __future__ import annotations

from vdc.lang import syntax as S

_BIN_PREC = {
    "||": 3, "&&": 4,
    "==": 6, "!=": 6, "<": 6, "<=": 6, ">": 6, ">=": 6,
    "++": 7, "+": 8, "-": 8, "*": 9, "/": 9, "%": 9,
}
_ATOM = 11


def _prec(x) -> int:
    if isinstance(x, S.BinOp):
        return _BIN_PREC[x.op]
    if isinstance(x, S.Ite):
        return 2
    if isinstance(x, (S.Not, S.Neg)):
        return 10
    if isinstance(x, S.Pure):
        return _prec(x.expr)
    if isinstance(x, S.Implies):
        return 1
    if isinstance(x, S.Star):
        return 4
    if isinstance(x, S.Classify):
        return 5
    if isinstance(x, (S.Exists, S.Forall)):
        return 0
    return _ATOM


def _wrap(x, need: int) -> str:
    text = format_formula(x)
    return f"({text})" if _prec(x) < need else text


def format_formula(x) -> str:
    """Render an expression or an assertion."""
    if isinstance(x, S.IntLit):
        return str(x.value) if x.value >= 0 else f"(-{-x.value})"
    if isinstance(x, S.BoolLit):
        return "true" if x.value else "false"
    if isinstance(x, S.Var):
        return x.name
    if isinstance(x, S.LabelLit):
        return x.name
    if isinstance(x, S.AttackerLevel):
        return "attacker"
    if isinstance(x, S.HistoryTerm):
        return "history"
    if isinstance(x, S.Nil):
        return "nil"
    if isinstance(x, S.Not):
        return "!" + _wrap(x.arg, _ATOM)
    if isinstance(x, S.Neg):
        return "-" + _wrap(x.arg, _ATOM)
    if isinstance(x, S.BinOp):
        p = _BIN_PREC[x.op]
        return f"{_wrap(x.left, p)} {x.op} {_wrap(x.right, p + 1)}"
    if isinstance(x, S.Ite):
        return f"{_wrap(x.cond, 3)} ? {_wrap(x.then, 3)} : {_wrap(x.orelse, 2)}"
    if isinstance(x, S.Call):
        return f"{x.fn}({', '.join(format_formula(a) for a in x.args)})"
    if isinstance(x, S.Pure):
        return format_formula(x.expr)
    if isinstance(x, S.Classify):
        return f"{_wrap(x.expr, 6)} :: {_wrap(x.level, _ATOM)}"
    if isinstance(x, S.Emp):
        return "emp"
    if isinstance(x, S.PointsTo):
        return f"[{format_formula(x.addr)}] |-> {_wrap(x.value, 6)}"
    if isinstance(x, S.Star):
        return f"{_wrap(x.left, 4)} && {_wrap(x.right, 5)}"
    if isinstance(x, S.Implies):
        return f"{_wrap(x.left, 2)} ==> {_wrap(x.right, 1)}"
    if isinstance(x, (S.Exists, S.Forall)):
        q = "exists" if isinstance(x, S.Exists) else "forall"
        return f"{q} {', '.join(x.names)}. {format_formula(x.body)}"
    if isinstance(x, S.HistoryPred):
        return f"History({format_formula(x.trace)})"
    if isinstance(x, S.PredApp):
        return f"{x.name}({', '.join(format_formula(a) for a in x.args)})"
    raise TypeError(f"cannot format {x!r}")


def _stmts(c) -> list:
    """Flatten a right-nested sequence; a left-nested one stays a block."""
    out = []
    while isinstance(c, S.Seq):
        out.append(c.first)
        c = c.second
    out.append(c)
    return out


def _block(c, ind: int) -> list:
    lines = []
    for s in _stmts(c):
        lines.extend(_stmt(s, ind + 1))
    return lines


def _braced(head: str, c, ind: int) -> list:
    pad = "    " * ind
    return [f"{pad}{head}{{"] + _block(c, ind) + [pad + "}"]


def _stmt(c, ind: int) -> list:
    pad = "    " * ind
    f = format_formula
    if isinstance(c, S.Seq):
        return _braced("", c, ind)
    if isinstance(c, S.Skip):
        return [pad + "skip;"]
    if isinstance(c, S.Assign):
        return [f"{pad}{c.var} := {f(c.expr)};"]
    if isinstance(c, S.Load):
        return [f"{pad}load {c.var} <- [{f(c.addr)}];"]
    if isinstance(c, S.Store):
        return [f"{pad}store [{f(c.addr)}] <- {f(c.value)};"]
    if isinstance(c, S.Lock):
        return [f"{pad}lock {c.name};"]
    if isinstance(c, S.Unlock):
        return [f"{pad}unlock {c.name};"]
    if isinstance(c, S.Out):
        return [f"{pad}out[{f(c.level)}]({f(c.value)});"]
    if isinstance(c, S.TraceCmd):
        return [f"{pad}trace({f(c.event)});"]
    if isinstance(c, S.Assume):
        by = f" by {c.by}" if c.by else ""
        return [f"{pad}assume({f(c.formula)}){by};"]
    if isinstance(c, S.Assert):
        return [f"{pad}assert({f(c.formula)});"]
    if isinstance(c, S.Split):
        return [f"{pad}split({f(c.cond)});"]
    if isinstance(c, S.If):
        lines = _braced(f"if ({f(c.cond)}) ", c.then, ind)
        if isinstance(c.orelse, S.Skip):
            return lines
        if isinstance(c.orelse, S.If):
            rest = _stmt(c.orelse, ind)
            lines[-1] = f"{pad}}} else {rest[0].lstrip()}"
            return lines + rest[1:]
        lines[-1] = pad + "} else {"
        return lines + _block(c.orelse, ind) + [pad + "}"]
    if isinstance(c, S.While):
        return _braced(f"while ({f(c.cond)}) invariant({f(c.invariant)}) ", c.body, ind)
    if isinstance(c, S.Par):
        lines = [pad + "par"]
        for br in (c.left, c.right):
            inner = "    " * (ind + 1)
            lines.append(pad + "{")
            lines.append(f"{inner}requires: {f(br.pre)}")
            lines.append(f"{inner}ensures: {f(br.post)}")
            lines.extend(_braced("", br.body, ind + 1))
            lines.append(pad + "}")
        return lines
    raise TypeError(f"cannot format command {c!r}")


def format_command(c, indent: int = 0) -> str:
    return "\n".join(line for s in _stmts(c) for line in _stmt(s, indent))


def format_program(p: S.Program) -> str:
    f = format_formula
    out = []
    if p.lattice_declared:
        lat = p.lattice
        order = ", ".join(f"{a} < {b}" for a, b in lat.order)
        out.append(f"lattice {{ {', '.join(lat.levels)}; order: {order}; }}")
    for e in p.events:
        out.append(f"event {e.name}({', '.join(['int'] * e.arity)});")
    for lk in p.locks:
        out.append(f"lock {lk.name} invariant: {f(lk.invariant)};")
    for q in p.predicates:
        out.append(f"predicate {q.name}({', '.join(q.params)}) = {f(q.body)};")
    for d in p.policies:
        params = ", ".join((d.trace_var,) + tuple(d.params))
        out.append(f"policy {d.name}({params}) {{ when: {f(d.when)}; release: {f(d.release)}; }}")
    for pr in p.procs:
        out.append("")
        out.append(f"proc {pr.name}({', '.join(pr.params)})")
        out.append(f"    requires: {f(pr.requires)}")
        out.append(f"    ensures: {f(pr.ensures)}")
        out.extend(_braced("", pr.body, 0))
    return "\n".join(out).lstrip("\n") + "\n"
