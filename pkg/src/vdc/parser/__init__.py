"""Surface syntax: lexer, parser, well-formedness checks and printer."""

from __future__ import annotations

from pathlib import Path

from vdc.errors import ParseError
from vdc.parser.diagnostics import Diagnostic
from vdc.parser.parser import Parser, parse_assertion_text, parse_expr_text
from vdc.parser.printer import format_command, format_formula, format_program
from vdc.parser.wellformed import check_program

__all__ = [
    "Diagnostic",
    "ParseError",
    "check_program",
    "format_command",
    "format_formula",
    "format_program",
    "parse_assertion_text",
    "parse_expr_text",
    "parse_file",
    "parse_program",
]


def parse_program(text: str, path: str = ""):
    """Parse and check a program; raise :class:`ParseError` on any problem."""
    prog = Parser(text, path).program()
    diags = check_program(prog)
    if diags:
        raise ParseError(diags)
    return prog


def parse_file(path) -> "object":
    path = Path(path)
    return parse_program(path.read_text(encoding="utf-8"), str(path))
