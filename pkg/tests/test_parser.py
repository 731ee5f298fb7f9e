from __future__ import annotations

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from vdc.errors import ParseError
from vdc.lang import syntax as S
from vdc.parser import format_formula, format_program, parse_assertion_text, parse_program
from vdc.parser.printer import format_command

from conftest import CORPUS, corpus, corpus_files

MINIMAL = "proc main() requires: emp ensures: emp { skip; }"


def test_avg_shape():
    p = corpus("avg")
    assert len(p.procs) == 2
    assert len(p.locks) == 1
    assert [q.name for q in p.policies] == ["avg"]
    pol = p.policies[0]
    assert format_formula(pol.when) == "len(tr) >= 6"
    assert format_formula(pol.release) == "sum(tr) / len(tr) :: low"


def test_minimal_program():
    p = parse_program(MINIMAL)
    assert [q.name for q in p.procs] == ["main"]
    assert isinstance(p.procs[0].body, S.Skip)
    assert p.lattice.levels == ("low", "high")


def test_declared_lattice():
    p = parse_program("lattice { low, mid, high; order: low < mid, mid < high }\n" + MINIMAL)
    assert p.lattice.leq("low", "high")
    assert p.lattice.leq("mid", "high")


def _diagnostics(text):
    with pytest.raises(ParseError) as info:
        parse_program(text)
    diags = info.value.diagnostics
    assert diags
    for d in diags:
        assert d.span.line >= 1 and d.span.col >= 1
    return [d.message for d in diags]


def test_assume_must_be_pure():
    msgs = _diagnostics("proc main() requires: emp ensures: emp { assume([p] :: low); }")
    assert "assume body must be pure" in msgs


def test_assume_points_to_rejected():
    msgs = _diagnostics("proc main() requires: emp ensures: emp { assume([p] |-> 1); }")
    assert "assume body must be pure" in msgs


@pytest.mark.parametrize(
    "body,needle",
    [
        ("lock m;", "m"),
        ("trace(Nope(1));", "Nope"),
        ("out[secret](1);", "secret"),
        ("x := ;", "unexpected"),
        ("x := 1 + true;", ""),
    ],
)
def test_rejections_carry_diagnostics(body, needle):
    msgs = _diagnostics("proc main() requires: emp ensures: emp { " + body + " }")
    assert any(needle in m for m in msgs)


def test_event_arity_checked():
    msgs = _diagnostics("event Ev(int);\nproc main() requires: emp ensures: emp { trace(Ev(1, 2)); }")
    assert any("Ev" in m for m in msgs)


def test_while_requires_invariant():
    _diagnostics("proc main() requires: emp ensures: emp { while (true) { skip; } }")


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
def test_corpus_round_trip(path):
    p = corpus(path.stem)
    text = format_program(p)
    again = parse_program(text)
    assert again == p
    assert format_program(again) == text


def test_nested_par_round_trip():
    def branch(body):
        return "{ requires: emp ensures: emp { " + body + " } }"

    inner = "par " + branch("b := 2;") + " " + branch("c := 3;")
    src = "proc main() requires: emp ensures: emp { par " + branch("a := 1;") + " " + branch(inner) + " }"
    p = parse_program(src)
    outer = p.procs[0].body
    assert isinstance(outer, S.Par)
    assert isinstance(outer.right.body, S.Par)
    assert parse_program(format_program(p)) == p


def test_parameterised_policy_rendering():
    src = (
        "event In(int);\n"
        "policy thr(tr, k) { when: len(tr) >= 1 && k >= 0; release: (sum(tr) > k) :: low; }\n" + MINIMAL
    )
    p = parse_program(src)
    text = format_program(p)
    assert "policy thr(tr, k) { when: len(tr) >= 1 && k >= 0; release:" in text
    assert parse_program(text) == p


def test_comments_ignored():
    p = parse_program("// header\nproc main() // trailing\n requires: emp ensures: emp { skip; // done\n }")
    assert isinstance(p.procs[0].body, S.Skip)


def test_spans_point_into_source():
    p = parse_program(MINIMAL, "x.vdc")
    sp = p.procs[0].span
    assert sp.path == "x.vdc" and sp.line == 1


# ------------------------------------------------------------------ fuzzing

TOKENS = [
    "proc", "main", "(", ")", "{", "}", "requires:", "ensures:", "emp", ";", "x", ":=", "1", "+",
    "::", "low", "high", "assume", "out", "[", "]", "<-", "load", "store", "while", "invariant",
    "par", "lock", "unlock", "m", "if", "else", "trace", "|->", "&&", "==>", "exists", ".", "policy",
    "when:", "release:", "event", "int", ",", "?", ":", "nil", "snoc", "len", "History", "@", "\"", "0x",
]


@settings(max_examples=400, suppress_health_check=[HealthCheck.too_slow])
@given(st.lists(st.sampled_from(TOKENS), max_size=40))
def test_fuzzed_token_streams_never_crash(toks):
    text = " ".join(toks)
    try:
        parse_program(text)
    except ParseError as exc:
        assert exc.diagnostics
        assert all(d.span.line >= 1 for d in exc.diagnostics)


@settings(max_examples=200)
@given(st.text(max_size=60))
def test_fuzzed_text_never_crashes(text):
    try:
        parse_program(text)
    except ParseError as exc:
        assert exc.diagnostics


@settings(max_examples=200)
@given(st.integers(0, 200), st.lists(st.sampled_from(TOKENS), max_size=8))
def test_mutated_corpus_never_crashes(pos, junk):
    text = (CORPUS / "avg.vdc").read_text()
    pos = min(pos * 5, len(text))
    mutated = text[:pos] + " ".join(junk) + text[pos:]
    try:
        parse_program(mutated)
    except ParseError as exc:
        assert exc.diagnostics


# ---------------------------------------------------- generated round trips

NAMES = ["x", "y", "t"]


def _exprs():
    leaf = st.one_of(st.integers(-3, 9).map(S.IntLit), st.sampled_from(["x", "y"]).map(S.Var))
    return st.recursive(
        leaf,
        lambda sub: st.one_of(
            st.builds(S.BinOp, st.sampled_from(["+", "-", "*", "/", "%"]), sub, sub),
            st.builds(S.Neg, sub),
            st.builds(lambda c, a, b: S.Ite(S.BinOp("<", c, S.IntLit(1)), a, b), sub, sub, sub),
        ),
        max_leaves=6,
    )


def _formulas():
    e = _exprs()
    atom = st.one_of(
        st.builds(lambda a, b, op: S.Pure(S.BinOp(op, a, b)), e, e, st.sampled_from(["==", "<", ">=", "!="])),
        st.builds(lambda a, l: S.Classify(a, S.LabelLit(l)), e, st.sampled_from(["low", "high"])),
        st.just(S.Emp()),
        st.builds(S.PointsTo, e, e),
    )
    return st.recursive(
        atom,
        lambda sub: st.one_of(
            st.builds(S.Star, sub, sub),
            st.builds(S.Implies, sub, sub),
            st.builds(lambda b: S.Exists(("v",), b), sub),
        ),
        max_leaves=5,
    )


@settings(max_examples=300)
@given(_formulas())
def test_formula_print_parse_round_trip(f):
    back = parse_assertion_text(format_formula(f))
    text = format_formula(back)
    assert parse_assertion_text(text) == back
    assert format_formula(parse_assertion_text(text)) == text


def _commands():
    e = _exprs()
    simple = st.one_of(
        st.builds(lambda x, v: S.Assign(x, v), st.sampled_from(["x", "y"]), e),
        st.builds(lambda v: S.Out(S.LabelLit("low"), v), e),
        st.builds(lambda a: S.Store(a, S.IntLit(0)), e),
        st.just(S.Skip()),
    )
    return st.recursive(
        simple,
        lambda sub: st.one_of(
            st.builds(lambda a, b: S.seq(a, b), sub, sub),
            st.builds(lambda c, a, b: S.If(S.BinOp(">", c, S.IntLit(0)), a, b), e, sub, sub),
        ),
        max_leaves=6,
    )


@settings(max_examples=200)
@given(_commands())
def test_command_round_trip(c):
    src = "proc main(x, y) requires: emp ensures: emp {\n" + format_command(c) + "\n}"
    p = parse_program(src)
    assert parse_program(format_program(p)) == p
