from __future__ import annotations

import time
from dataclasses import replace

import pytest

from vdc.errors import DefinitionError
from vdc.lang import syntax as S
from vdc.parser import format_formula, format_program, parse_assertion_text, parse_program
from vdc.verifier import (
    REFUTED,
    VERIFIED,
    AuditTriple,
    audit,
    audit_obligations,
    inline_audit,
    verify,
    verify_with_audit,
)

from conftest import corpus, corpus_files, needs_solver

pytestmark = needs_solver


def src(body, params="x", requires="emp", ensures="true", extra=""):
    return parse_program(f"{extra}\nproc main({params}) requires: {requires} ensures: {ensures} {{ {body} }}")


def kinds(bundle):
    return bundle.kinds_failed()


def conjunct_texts(P):
    return {format_formula(c) for c in S.conjuncts(P)}


# ---------------------------------------------------------------- avg


@pytest.fixture(scope="module")
def avg():
    p = corpus("avg")
    t0 = time.perf_counter()
    b = verify(p)
    return p, b, time.perf_counter() - t0


def test_avg_verifies(avg):
    _, b, elapsed = avg
    assert b.status == VERIFIED, [(v.kind, v.message) for v in b.vcs if v.status != "Valid"]
    assert all(v.status == "Valid" for v in b.vcs)
    assert elapsed < 30


def test_avg_single_triple(avg):
    _, b, _ = avg
    (t,) = b.triples
    facts = conjunct_texts(t.P)
    tr = format_formula(t.tr)
    assert f"st_count == len({tr})" in facts
    assert f"st_sum == sum({tr})" in facts
    assert "st_count >= 6" in facts
    assert "avg == st_sum / st_count" in facts
    assert format_formula(t.rho) == "avg :: low"


def test_avg_output_vc(avg):
    _, b, _ = avg
    outs = [v for v in b.vcs if v.kind == "output-value"]
    assert outs and all(v.status == "Valid" for v in outs)
    (v,) = outs
    facts = conjunct_texts(v.hyp)
    # symbolic values stand in for avg, st_count and st_sum
    assert format_formula(v.goal) in facts
    assert any("== len(" in f for f in facts) and any("== sum(" in f for f in facts)


def test_avg_audit(avg):
    p, b, _ = avg
    rep = audit(b.triples, p.policies[0], p)
    assert rep.status == VERIFIED
    assert [v.kind for v in rep.vcs] == ["audit-when", "audit-release"]


def test_avg_audit_stricter_threshold(avg):
    p, b, _ = avg
    strict = parse_program(
        "event Input(int);\npolicy avg7(tr) { when: len(tr) >= 7; release: sum(tr) / len(tr) :: low; }\n"
        "proc main() requires: emp ensures: emp { skip; }"
    ).policies[0]
    rep = audit(b.triples, strict, p)
    when = next(v for v in rep.vcs if v.kind == "audit-when")
    assert when.status == "Invalid"
    m = when.verdict.model
    tr = format_formula(b.triples[0].tr)
    lens = {len(side[tr]) for side in (m.major, m.minor) if tr in side}
    assert 6 in lens


def test_avg_inline(avg):
    p, _, _ = avg
    inl = inline_audit(p, p.policies[0])
    b = verify(inl)
    assert b.status == VERIFIED
    assert b.triples == []
    assert parse_program(format_program(inl)) == inl


def test_inline_identity_without_assume():
    p = corpus("shared_counter")
    pol = corpus("avg").policies[0]
    assert inline_audit(p, pol) == p


# ------------------------------------------------------------ mutants


@pytest.mark.parametrize(
    "name,kind",
    [
        ("mutant_no_guard", "audit-when"),
        ("mutant_no_assume", "output-value"),
        ("mutant_assume_sum", "audit-release"),
        ("mutant_parity_branch", "branch-low"),
        ("mutant_high_address", "load-address-low"),
    ],
)
def test_mutant_kill(name, kind):
    p = corpus(name)
    _, rep, status = verify_with_audit(p, p.policies[0])
    failed = {v.kind for v in rep.vcs if v.status == "Invalid"} | verify(p).kinds_failed()
    assert status == REFUTED
    assert failed == {kind}


def test_inlined_guardless_mutant_fails_at_assert():
    p = corpus("mutant_no_guard")
    b = verify(inline_audit(p, p.policies[0]))
    assert b.status == REFUTED
    assert b.kinds_failed() == {"entailment"}


# ------------------------------------------------------------ rules


def test_branch_on_high():
    b = verify(src("if (x) { skip; } else { skip; }", requires="x :: high"))
    assert b.status == REFUTED and kinds(b) == {"branch-low"}


def test_branch_on_low():
    assert verify(src("if (x) { skip; } else { skip; }", requires="x :: low")).status == VERIFIED


def test_load_through_high_address():
    b = verify(src("load y <- [x];", "x, y", requires="x :: high && exists v. [x] |-> v", ensures="exists v. [x] |-> v"))
    assert b.status == REFUTED and kinds(b) == {"load-address-low"}


def test_store_through_high_address():
    b = verify(src("store [x] <- 1;", requires="x :: high && exists v. [x] |-> v", ensures="exists v. [x] |-> v"))
    assert kinds(b) == {"store-address-low"}


def test_missing_chunk():
    b = verify(src("load y <- [x];", "x, y", requires="x :: low"))
    assert b.status == REFUTED
    assert any("memory unproven" in v.message for v in b.failed)


def test_assignment_substitutes():
    b = verify(src("x := 0; assert(y == 0 + 1);", "x, y", requires="y == x + 1 && x == 0"))
    assert b.status == VERIFIED
    b = verify(src("y := x + 1; x := 0; assert(y == 1);", "x, y", requires="x == 0"))
    assert b.status == VERIFIED


def test_output_level_must_be_low():
    b = verify(src("out[d ? high : low](1);", "x, d", requires="d :: high"))
    assert "output-level" in kinds(b)


def test_output_to_high_channel_is_fine():
    assert verify(src("out[high](x);", requires="x :: high"), attacker="low").status == VERIFIED


def test_direct_leak_refuted():
    b = verify(corpus("direct_leak"))
    assert kinds(b) == {"output-value"}


def test_assume_makes_output_safe():
    p = src("trace(In(x)); assume(x :: low); out[low](x);", requires="x :: high && History(nil)",
            ensures="exists t. History(t)", extra="event In(int);")
    b = verify(p)
    assert b.status == VERIFIED
    (t,) = b.triples
    assert format_formula(t.rho) == "x :: low"


def test_every_assume_yields_one_triple():
    p = src("trace(In(x)); assume(x :: low); if (x > 1) { assume((x + 1) :: low); } else { skip; } out[low](x);",
            requires="x :: high && History(nil)", ensures="exists t. History(t)", extra="event In(int);")
    b = verify(p)
    assert len(b.triples) == 2


def test_loop_invariant_checked():
    ok = src("while (x > 0) invariant(x :: low) { x := x - 1; }", requires="x :: low")
    assert verify(ok).status == VERIFIED
    bad = src("while (x > 0) invariant(x :: low && x >= 5) { x := x - 1; }", requires="x :: low && x >= 5")
    assert "invariant-restore" in kinds(verify(bad)) or "entailment" in kinds(verify(bad))
    est = src("while (x > 0) invariant(x >= 5) { x := x + 1; }", requires="x :: low")
    assert "invariant-establish" in kinds(verify(est))


def test_split_on_high_bit():
    p = src("split(d); out[low](x);", "x, d", requires="d :: high && x :: (d ? high : low) && d == 0")
    assert verify(p).status == VERIFIED


def test_lock_invariant_restore():
    good = corpus("shared_counter")
    assert verify(good).status == VERIFIED
    bad = parse_program(
        "lock m invariant: exists v. [0] |-> v && v :: low;\n"
        "proc main(h) requires: h :: high ensures: emp { lock m; store [0] <- h; unlock m; }"
    )
    assert kinds(verify(bad)) == {"invariant-restore"}


def test_par_footprints():
    p = src(
        "par { requires: [0] |-> 1 ensures: [0] |-> 2 { store [0] <- 2; } }"
        " { requires: [1] |-> 1 ensures: [1] |-> 1 { skip; } }",
        requires="[0] |-> 1 && [1] |-> 1",
        ensures="[0] |-> 2 && [1] |-> 1",
    )
    assert verify(p).status == VERIFIED
    clash = src(
        "par { requires: emp ensures: emp { x := 1; } } { requires: emp ensures: emp { y := x; } }", "x, y"
    )
    assert "par-split" in kinds(verify(clash))


def test_postcondition_checked():
    b = verify(src("x := 1;", requires="emp", ensures="x == 2"))
    assert kinds(b) == {"postcondition"}


def test_leftover_heap_fails():
    b = verify(src("skip;", requires="[0] |-> 1", ensures="emp"))
    assert b.status == REFUTED


def test_trace_needs_history():
    b = verify(src("trace(In(x));", extra="event In(int);"))
    assert b.status == REFUTED


def test_division_by_secret_zero_test_is_branch_low():
    b = verify(src("y := 10 / x;", "x, y", requires="x :: high"))
    assert "branch-low" in kinds(b)


def test_audit_without_history():
    p = src("assume(x :: low); out[low](x);", requires="x :: high")
    b = verify(p)
    pol = corpus("parity_out").policies[0]
    with pytest.raises(DefinitionError):
        audit(b.triples, pol, p)


def test_audit_unknown_event():
    t = AuditTriple(S.Pure(S.BoolLit(True)), S.Call("Bogus", (S.IntLit(1),)), parse_assertion_text("x :: low"))
    with pytest.raises(DefinitionError):
        audit_obligations(t, corpus("avg").policies[0], corpus("avg"))


def test_frame_rule():
    base = src("x := x + 1; out[low](x);", requires="x :: low", ensures="true")
    framed = src("x := x + 1; out[low](x);", requires="x :: low && [7] |-> 3", ensures="[7] |-> 3")
    a, b = verify(base), verify(framed)
    assert [(v.kind, v.status) for v in a.vcs if v.kind != "postcondition"] == [
        (v.kind, v.status) for v in b.vcs if v.kind != "postcondition"
    ]
    assert a.status == b.status == VERIFIED


def test_vc_order_deterministic():
    p = corpus("avg")
    ids = [(v.kind, v.span.line if v.span else 0) for v in verify(p).vcs]
    assert ids == [(v.kind, v.span.line if v.span else 0) for v in verify(p).vcs]
    lines = [v.span.line for v in verify(p).vcs if v.span]
    assert lines == sorted(lines)


def test_pinned_attacker():
    p = src("out[low](x);", requires="x :: high")
    assert verify(p, attacker="low").status == REFUTED
    # a high attacker already sees x in both runs, so x :: high makes it equal
    assert verify(p, attacker="high").status == VERIFIED
    q = src("out[high](x);", requires="x :: high")
    assert verify(q, attacker="high").status == VERIFIED


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
def test_audit_inline_agree(path):
    p = corpus(path.stem)
    for pol in p.policies:
        _, _, status = verify_with_audit(p, pol)
        assert verify(inline_audit(p, pol)).status == status
