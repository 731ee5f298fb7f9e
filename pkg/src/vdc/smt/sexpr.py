"""Minimal s-expression reader for solver responses."""

from __future__ import annotations

import re

_TOKEN = re.compile(r'\s*(?:(\()|(\))|(\|[^|]*\|)|("(?:[^"]|"")*")|([^\s()|"]+))')


def parse_sexprs(text: str) -> list:
    """Parse all top-level s-expressions; atoms are returned as strings."""
    stack: list = [[]]
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ValueError(f"cannot read solver output near {text[pos:pos + 20]!r}")
        pos = m.end()
        if m.group(1):
            stack.append([])
        elif m.group(2):
            if len(stack) == 1:
                raise ValueError("unbalanced ')' in solver output")
            done = stack.pop()
            stack[-1].append(done)
        elif m.group(3):
            stack[-1].append(m.group(3)[1:-1])
        else:
            stack[-1].append(m.group(4) or m.group(5))
    if len(stack) != 1:
        raise ValueError("unbalanced '(' in solver output")
    return stack[0]
