from __future__ import annotations

import re
from dataclasses import dataclass

from vdc.errors import ParseError
from vdc.lang.syntax import Span
from vdc.parser.diagnostics import Diagnostic

KEYWORDS = {
    "lattice", "order", "event", "int", "lock", "unlock", "invariant", "predicate",
    "policy", "when", "release", "proc", "requires", "ensures", "load", "store",
    "out", "assume", "assert", "split", "trace", "skip", "if", "else", "while",
    "par", "emp", "History", "exists", "forall", "true", "false", "nil",
    "attacker", "history", "mod", "by",
}

# longest first
PUNCT = [
    "|->", "==>", ":=", "<-", "::", "==", "!=", "<=", ">=", "&&", "||", "++",
    "<", ">", "+", "-", "*", "/", "%", "!", "?", ":", ";", ",", ".", "(", ")",
    "[", "]", "{", "}", "=",
]

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>//[^\n]*)"
    r"|(?P<int>[0-9]+)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<punct>" + "|".join(re.escape(p) for p in PUNCT) + ")"
)


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "ident", "kw", "punct", "eof"
    text: str
    span: Span

    def __repr__(self):
        return f"{self.kind}:{self.text!r}@{self.span.line}:{self.span.col}"


def tokenize(text: str, path: str = "") -> list:
    tokens = []
    pos, line, col = 0, 1, 1
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            span = Span(line, col, line, col + 1, path)
            raise ParseError([Diagnostic("error", f"unexpected character {text[pos]!r}", span)])
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            line += 1
            col = 1
        elif kind in ("ws", "comment"):
            col += len(s)
        else:
            span = Span(line, col, line, col + len(s), path)
            if kind == "ident" and s in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, s, span))
            col += len(s)
        pos = m.end()
    tokens.append(Token("eof", "", Span(line, col, line, col, path)))
    return tokens
