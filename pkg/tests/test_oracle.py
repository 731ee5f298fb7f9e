from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vdc.errors import UsageError
from vdc.lang import syntax as S
from vdc.lang.lattice import Lattice
from vdc.lang.values import Event, FMap
from vdc.oracle import (
    FAIL,
    PAPER,
    PASS,
    Oracle,
    aligned,
    assumption_failed,
    build_space,
    check_policy_agnostic,
    check_policy_specific,
    desugar_policy,
    obs_equiv,
    policy_excludes,
    project,
    visible,
)
from vdc.parser import parse_assertion_text, parse_program
from vdc.semantics import LEFT, RIGHT, TAU, AssumeAct, LoadAct, OutAct, StoreAct, TraceAct, initial, runs

from conftest import corpus

LOW_X = parse_assertion_text("x :: low")


def prog(body, requires="x :: high", extra=""):
    return parse_program(f"{extra}\nproc main(x) requires: {requires} ensures: true {{ {body} }}")


def assume(x):
    return AssumeAct(FMap({"x": x}), LOW_X)


# --------------------------------------------------------------- visibility


def test_visible_table():
    assert visible("low", assume(1)) == TAU
    assert visible("low", LoadAct(3)) == LoadAct(3)
    assert visible("low", StoreAct(3)) == StoreAct(3)
    assert visible("low", LEFT) == LEFT and visible("low", RIGHT) == RIGHT
    assert visible("low", TraceAct(Event("Ev", (1,)))) == TAU
    assert visible("low", OutAct("high", 9)) == TAU
    assert visible("high", OutAct("low", 9)) == OutAct("low", 9)
    assert visible("low", OutAct("low", 9)) == OutAct("low", 9)


def test_visible_literal_direction_flag():
    assert visible("low", OutAct("high", 9), direction=PAPER) == OutAct("high", 9)
    assert visible("high", OutAct("low", 9), direction=PAPER) == TAU


def test_visible_incomparable_levels():
    lat = Lattice.build(("low", "alice", "bob", "high"), (("low", "alice"), ("low", "bob"), ("alice", "high"), ("bob", "high")))
    assert visible("alice", OutAct("bob", 1), lattice=lat) == TAU
    assert visible("alice", OutAct("alice", 1), lattice=lat) == OutAct("alice", 1)


def test_obs_equiv_examples():
    assert obs_equiv("low", (TAU, OutAct("low", 1)), (TAU, OutAct("low", 1)))
    assert not obs_equiv("low", (OutAct("low", 1),), (OutAct("low", 2),))
    assert obs_equiv("low", (assume(1),), (TAU,))
    assert not obs_equiv("low", (TAU,), (TAU, TAU))


def test_aligned_examples():
    assert aligned("low", (assume(1),), (assume(2),))
    assert aligned("low", (TraceAct(Event("Ev", (1,))),), (TraceAct(Event("Ev", (2,))),))
    assert not aligned("low", (assume(1),), (TAU,))
    assert aligned("low", (OutAct("high", 1),), (OutAct("high", 2),))
    assert not aligned("low", (OutAct("low", 1),), (OutAct("low", 2),))
    assert not aligned("low", (OutAct("high", 1),), (TAU,))


ACTIONS = [TAU, LEFT, RIGHT, LoadAct(0), LoadAct(1), OutAct("low", 0), OutAct("low", 1), OutAct("high", 0),
           OutAct("high", 1), TraceAct(Event("Ev", (0,))), TraceAct(Event("Ev", (1,))), assume(0), assume(1)]


@settings(max_examples=500)
@given(st.lists(st.sampled_from(ACTIONS), max_size=6), st.lists(st.sampled_from(ACTIONS), max_size=6),
       st.sampled_from(["low", "high"]))
def test_aligned_implies_obs_equiv(a, b, lvl):
    if aligned(lvl, tuple(a), tuple(b)):
        assert obs_equiv(lvl, tuple(a), tuple(b))
    # alignment is reflexive
    assert aligned(lvl, tuple(a), tuple(a))


# ------------------------------------------------------------- assumptions


def test_assumption_failed_examples():
    assert assumption_failed("low", 0, (assume(1),), (assume(2),))
    assert not assumption_failed("low", 0, (assume(1),), (assume(1),))
    assert not assumption_failed("low", 0, (assume(1),), (TAU,))


def test_assumption_failed_index_checked():
    with pytest.raises(UsageError):
        assumption_failed("low", 2, (assume(1),), (assume(2),))


# ------------------------------------------------------------------ policies

AVG = corpus("avg").policies[0]


def inputs(*vals):
    return tuple(TraceAct(Event("Input", (v,))) for v in vals)


def test_policy_excludes_examples():
    a, b = inputs(2, 2, 2, 2, 2, 2) + (TAU,), inputs(3, 3, 3, 3, 3, 3) + (TAU,)
    assert policy_excludes("low", AVG, 6, a, b)  # averages 2 vs 3
    assert not policy_excludes("low", AVG, 3, a, b)  # only 3 events recorded
    assert not policy_excludes("low", AVG, 6, a, a)
    same_avg = inputs(1, 3, 2, 2, 2, 2) + (TAU,)
    assert not policy_excludes("low", AVG, 6, a, same_avg)


def test_parameterised_policy_desugars():
    p = parse_program(
        "event In(int);\npolicy thr(tr, k) { when: k >= 1; release: (sum(tr) > k) :: low; }\n"
        "proc main() requires: emp ensures: emp { skip; }"
    ).policies[0]
    when, release = desugar_policy(p)
    assert isinstance(when, S.Exists) and when.names == ("k",)
    assert isinstance(release, S.Forall)
    a, b = (TraceAct(Event("In", (1,))), TAU), (TraceAct(Event("In", (3,))), TAU)
    # k = 2 separates 1 from 3
    assert policy_excludes("low", p, 1, a, b, domain=range(4))
    # no k in 1..3 puts 0 and 1 on different sides of "sum > k"
    c = (TraceAct(Event("In", (0,))), TAU)
    assert not policy_excludes("low", p, 1, a, c, domain=range(4))


# -------------------------------------------------------------- uncertainty


def naive_uncertainty(program, space, major, sigma):
    """Minor states with some equal-length run whose projection matches."""
    want = project(space.level, sigma, lattice=program.lattice)
    n = sum(1 for a in sigma if a not in (LEFT, RIGHT))
    out = set()
    for j in space.pairs[major]:
        st_ = space.states[j]
        for s2, _ in runs(initial(space.cmd, st_.store, st_.heap, space.locks), n):
            if len(s2) == len(sigma) and project(space.level, s2, lattice=program.lattice) == want:
                out.add(j)
                break
    return out


def _index(space, **vals):
    return next(i for i, s in enumerate(space.states) if all(s.store[k] == v for k, v in vals.items()))


def _full(orc, i):
    return max(orc.schedules[i], key=len)


def test_uncertainty_parity_output():
    p = prog("out[low](x % 2);")
    space = build_space(p, (0, 3))
    orc = Oracle(space, 4)
    i = _index(space, x=2)
    sigma = _full(orc, i)
    got = {space.states[j].store["x"] for j in orc.uncertainty(i, sigma)}
    assert got == {0, 2}
    assert orc.uncertainty(i, sigma) == naive_uncertainty(p, space, i, sigma)
    assert orc.uncertainty(i, ()) == frozenset(range(len(space.states)))


def test_uncertainty_invisible_channel():
    p = prog("out[high](x);")
    space = build_space(p, (0, 3))
    orc = Oracle(space, 4)
    for i in range(len(space.states)):
        assert orc.uncertainty(i, _full(orc, i)) == frozenset(range(4))


def test_assumed_release_examples():
    p = prog("assume(x :: low); out[low](x);")
    space = build_space(p, (0, 3))
    orc = Oracle(space, 4)
    i = _index(space, x=1)
    full = _full(orc, i)
    prefix = full[:1]  # the assume step, before the output is observed
    rel = {space.states[j].store["x"] for j in orc.assumed_release(i, prefix)}
    assert rel == {0, 2, 3}
    # after the output only x' = 1 stays equivalent, and it agrees with x = 1
    assert orc.assumed_release(i, full) == frozenset()
    for sigma in (prefix, full):
        assert orc.assumed_release(i, sigma) <= orc.uncertainty(i, sigma)
    q = prog("out[low](x % 2);")
    sq = build_space(q, (0, 3))
    oq = Oracle(sq, 4)
    assert all(not oq.assumed_release(i, s) for i in range(4) for s in oq.schedules[i])


def test_policy_release_extremes():
    p = prog("trace(In(x)); out[low](x % 2);", requires="x :: high && History(nil)", extra="event In(int);")
    space = build_space(p, (0, 3))
    orc = Oracle(space, 4)
    never = parse_program("event In(int);\npolicy no(tr) { when: false; release: true; }\n"
                          "proc main() requires: emp ensures: emp { skip; }").policies[0]
    always = parse_program("event In(int);\npolicy all(tr) { when: true; release: false; }\n"
                           "proc main() requires: emp ensures: emp { skip; }").policies[0]
    for i in range(len(space.states)):
        for sigma in orc.schedules[i]:
            assert orc.policy_release(i, never, sigma) == frozenset()
            expected = orc.uncertainty(i, sigma) if sigma else frozenset()
            assert orc.policy_release(i, always, sigma) == expected


@pytest.mark.parametrize("name", ["assume_out", "parity_out", "shared_counter", "trace_loop"])
def test_oracle_sets_invariants(name):
    p = corpus(name)
    space = build_space(p, (0, 3))
    orc = Oracle(space, 8)
    for i in range(len(space.states)):
        for sigma in orc.schedules[i]:
            u = orc.uncertainty(i, sigma)
            assert i in u  # reflexivity
            assert orc.assumed_release(i, sigma) <= u
            for pol in p.policies:
                assert orc.policy_release(i, pol, sigma) <= u
        for sigma in orc.schedules[i][:40]:
            assert orc.uncertainty(i, sigma) == naive_uncertainty(p, space, i, sigma)
        # longer observations never add minors
        for sigma in orc.schedules[i]:
            for tau in orc.schedules[i]:
                if len(tau) > len(sigma) and tau[: len(sigma)] == sigma:
                    assert orc.uncertainty(i, tau) <= orc.uncertainty(i, sigma)


# ------------------------------------------------------------------ spaces


def test_space_filters_by_precondition():
    p = prog("skip;", requires="x :: low && x >= 2")
    space = build_space(p, (0, 3))
    assert [s.store["x"] for s in space.states] == [2, 3]
    # x :: low forces equal minors
    assert all(space.pairs[i] == [i] for i in range(2))


def test_space_lays_out_heap():
    p = prog("load y <- [x];", requires="x :: low && exists v. [x] |-> v")
    space = build_space(p, (0, 1))
    assert {(s.store["x"], tuple(s.heap.items())) for s in space.states} == {
        (0, ((0, 0),)), (0, ((0, 1),)), (1, ((1, 0),)), (1, ((1, 1),))}


def test_space_needs_ranges():
    with pytest.raises(UsageError):
        build_space(corpus("direct_leak"), {})


# ------------------------------------------------------------------ theorems


def test_agnostic_pass_with_assume():
    p = prog("assume(x :: low); out[low](x);")
    assert check_policy_agnostic(p, build_space(p, (0, 3)), 12).status == PASS


def test_agnostic_detects_direct_leak():
    p = prog("out[low](x);")
    r = check_policy_agnostic(p, build_space(p, (0, 3)), 12)
    assert r.status == FAIL
    pairs = {(v["major"]["store"]["x"], v["minor"]["store"]["x"]) for v in r.violations}
    assert (1, 0) in pairs
    assert all(a != b for a, b in pairs)
    assert {v["kind"] for v in r.violations} == {"uncertainty-decrease"}


def test_agnostic_public_program():
    p = corpus("public_straight")
    space = build_space(p, (0, 3))
    assert check_policy_agnostic(p, space, 12).status == PASS
    orc = Oracle(space, 12)
    assert all(not orc.assumed_release(i, s) for i in range(len(space.states)) for s in orc.schedules[i])


def test_specific_trivial_policy():
    p = parse_program(
        "event In(int);\npolicy open(tr) { when: true; release: sum(tr) :: low; }\n"
        "proc main(x) requires: x :: high && History(nil) ensures: exists t. History(t) "
        "{ trace(In(x)); assume(x :: low); out[low](x); }"
    )
    space = build_space(p, (0, 3))
    assert check_policy_specific(p, p.policies[0], space, 12).status == PASS


def test_specific_detects_release_beyond_policy():
    p = corpus("release_second")
    space = build_space(p, (0, 2))
    r = check_policy_specific(p, p.policies[0], space, 12)
    assert r.status == FAIL


def test_budget_reported():
    p = corpus("avg_small")
    r = check_policy_agnostic(p, build_space(p, (0, 2)), 30, max_nodes=50)
    assert r.status == "budget-exceeded"


def test_empty_space_is_flagged():
    p = corpus("avg_small")  # the input cell must sit at address 2
    r = check_policy_agnostic(p, build_space(p, (0, 1)), 4)
    assert r.states_checked == 0 and "no initial state" in r.detail


def test_report_json_fields():
    p = prog("out[low](x);")
    js = check_policy_agnostic(p, build_space(p, (0, 1)), 4).to_json()
    assert set(js) >= {"theorem", "status", "violations", "states_checked", "prefixes_checked"}
    assert set(js["violations"][0]) >= {"major", "sigma", "minor", "kind"}
