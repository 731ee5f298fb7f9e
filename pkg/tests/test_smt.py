from __future__ import annotations

import os
import random
import stat

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from vdc.errors import CapabilityError
from vdc.lang.values import Event
from vdc.parser import parse_assertion_text, parse_program
from vdc.smt import (
    INVALID,
    UNKNOWN,
    VALID,
    SolverConfig,
    brute_force_entailment,
    check_entailment,
    encode_relational,
    make_entailment,
    replay,
)
from vdc.smt.solver import parse_model

from conftest import needs_solver
from oracles import gen_entailment

EVENTS = {"Input": 1}
PROG = parse_program("event Input(int);\nproc main() requires: emp ensures: emp { skip; }")


def A(text):
    return parse_assertion_text(text, PROG)


def ent(hyp, goal, **kw):
    kw.setdefault("events", EVENTS)
    return make_entailment(A(hyp), A(goal), **kw)


# ---------------------------------------------------------------- encoding


def test_encoding_shape():
    text = encode_relational(ent("x :: high", "x :: low"))
    assert "(set-logic ALL)" in text
    assert "(declare-const x$1 Int)" in text and "(declare-const x$2 Int)" in text
    assert "(define-fun leq" in text
    assert text.rstrip().endswith("(check-sat)\n(get-model)".rstrip())
    assert "(assert (not " in text


def test_encoding_deterministic():
    a = encode_relational(ent("x :: low && y == x + 1", "y :: low"))
    b = encode_relational(ent("x :: low && y == x + 1", "y :: low"))
    assert a == b


def test_trace_encoding_uses_list_sort():
    text = encode_relational(ent("len(tr) >= 6", "len(tr) >= 2"))
    assert "tr$1" in text and "tr$2" in text
    assert "Trace" in text and "define-fun-rec" in text


def test_spatial_entailment_rejected():
    with pytest.raises(CapabilityError):
        make_entailment(A("[0] |-> 1"), A("emp"))


# ----------------------------------------------------------------- solver


@needs_solver
def test_identity_valid():
    assert check_entailment(ent("x :: low", "x :: low")).status == VALID


@needs_solver
def test_high_does_not_give_low():
    v = check_entailment(ent("x :: high", "x :: low"))
    assert v.status == INVALID
    m = v.model
    assert m.attacker == "low" and m.major["x"] != m.minor["x"]
    assert replay(ent("x :: high", "x :: low"), m)


@needs_solver
def test_known_constant_is_low():
    assert check_entailment(ent("x == 5 && x :: high", "x :: low")).status == VALID


@needs_solver
def test_conditional_label_with_public_flag():
    assert check_entailment(ent("d :: low && d == 0 && x :: (d ? high : low)", "x :: low")).status == VALID


@needs_solver
def test_true_does_not_give_low():
    assert check_entailment(ent("true", "x :: low")).status == INVALID


@needs_solver
def test_avg_release_obligation():
    e = ent(
        "st_count == len(tr) && st_sum == sum(tr) && st_count :: low && st_count >= 6"
        " && avg == st_sum / st_count && sum(tr) / len(tr) :: low",
        "avg :: low",
    )
    assert "tr$1" in encode_relational(e)
    assert check_entailment(e).status == VALID


@needs_solver
def test_avg_release_without_policy_fails():
    e = ent(
        "st_count == len(tr) && st_sum == sum(tr) && st_count :: low && st_count >= 6 && avg == st_sum / st_count",
        "avg :: low",
    )
    v = check_entailment(e)
    assert v.status == INVALID
    assert replay(e, v.model)


@needs_solver
def test_snoc_chain_lengths():
    assert check_entailment(ent("t == snoc(snoc(nil, Input(x)), Input(y))", "len(t) == 2 && sum(t) == x + y")).valid


@needs_solver
def test_trace_countermodel_is_replayed():
    e = ent("len(t) >= 2", "len(t) >= 6")
    v = check_entailment(e)
    assert v.status == INVALID
    t = v.model.major["t"]
    assert all(isinstance(x, Event) for x in t)
    assert replay(e, v.model)


@needs_solver
def test_pinned_attacker():
    e = ent("x :: high", "x :: low", attacker="high")
    assert check_entailment(e).status == VALID  # a high attacker compares both
    e2 = ent("x :: high", "x :: low", attacker="low")
    assert check_entailment(e2).status == INVALID


@needs_solver
def test_timeout_is_unknown(tmp_path):
    slow = tmp_path / "z3-slow"
    slow.write_text("#!/bin/sh\nsleep 5\n")
    slow.chmod(slow.stat().st_mode | stat.S_IXUSR)
    v = check_entailment(ent("true", "x :: low"), SolverConfig(solver=str(slow), timeout=0.3))
    assert v.status == UNKNOWN and "timed out" in v.reason


def test_crashing_solver_is_unknown(tmp_path):
    bad = tmp_path / "broken"
    bad.write_text("#!/bin/sh\necho boom >&2\nexit 3\n")
    bad.chmod(bad.stat().st_mode | stat.S_IXUSR)
    v = check_entailment(ent("true", "x :: low"), SolverConfig(solver=str(bad)))
    assert v.status == UNKNOWN and "boom" in v.reason


def test_missing_solver_falls_back_to_enumeration():
    cfg = SolverConfig(solver="/nonexistent/z3", ranges=(0, 3))
    assert check_entailment(ent("x :: low && y == x", "y :: low"), cfg).status == VALID
    cfg = SolverConfig(solver="/nonexistent/z3")
    assert check_entailment(ent("x :: low", "x :: low"), cfg).status == UNKNOWN


def test_model_parsing():
    e = ent("x :: high", "x :: low")
    out = "(\n (define-fun x$2 () Int (- 3))\n (define-fun x$1 () Int 4)\n (define-fun att () Label L_low)\n)"
    m = parse_model(out, e)
    assert m.major == {"x": 4} and m.minor == {"x": -3} and m.attacker == "low"


# ------------------------------------------------------------- brute force


def test_brute_force_substitution():
    assert brute_force_entailment(ent("x :: low && y == x", "y :: low"), (0, 3)).status == VALID


def test_brute_force_short_trace():
    v = brute_force_entailment(ent("len(t) >= 2", "len(t) >= 6"), (0, 3))
    assert v.status == INVALID
    assert len(v.model.major["t"]) == 2 or len(v.model.minor["t"]) == 2


def test_brute_force_guard():
    with pytest.raises(CapabilityError):
        brute_force_entailment(ent("true", "x + y + z + w :: low"), (0, 30), max_pairs=1000)


def test_brute_force_matches_known_examples():
    assert brute_force_entailment(ent("x == 5 && x :: high", "x :: low"), (0, 7)).status == VALID
    assert brute_force_entailment(ent("d :: low && d == 0 && x :: (d ? high : low)", "x :: low"), (0, 3)).valid
    assert brute_force_entailment(ent("true", "x :: low"), (0, 3)).status == INVALID


@needs_solver
@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.randoms(use_true_random=False))
def test_differential_sample(rng):
    hyp, goal, att = gen_entailment(rng)
    e = make_entailment(hyp, goal, attacker=att)
    smt = check_entailment(e)
    bf = brute_force_entailment(e, (0, 3))
    if smt.status != UNKNOWN:
        assert smt.status == bf.status
    if smt.invalid:
        assert replay(e, smt.model)
    if bf.invalid:
        assert replay(e, bf.model)
