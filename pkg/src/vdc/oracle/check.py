"""Finite state spaces, attacker uncertainty and the two security theorems.

Everything here is exhaustive: every initial state of a finite space is run
for every schedule up to a step bound, and the knowledge sets are compared
literally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

from vdc.errors import CapabilityError, DefinitionError, UsageError
from vdc.lang import syntax as S
from vdc.lang.evaluate import eval_expr, free_vars
from vdc.lang.values import FMap, value_to_json
from vdc.oracle.knowledge import (
    SOUND,
    assume_indices,
    assumption_failed,
    is_scheduling,
    policy_excludes,
    project,
)
from vdc.parser.wellformed import assigned_vars, read_vars
from vdc.releval import RelEval, Side
from vdc.semantics.actions import action_to_json
from vdc.semantics.interp import initial, runs

PASS, FAIL, BUDGET = "pass", "fail", "budget-exceeded"


DEFAULT_MAX_NODES = 500_000


@dataclass(frozen=True)
class InitState:
    store: FMap
    heap: FMap

    def to_json(self) -> dict:
        return {
            "store": {k: value_to_json(v) for k, v in sorted(self.store.items())},
            "heap": {str(a): value_to_json(v) for a, v in sorted(self.heap.items())},
        }

    def __str__(self):
        st = ", ".join(f"{k}={v}" for k, v in sorted(self.store.items()))
        hp = ", ".join(f"[{a}]={v}" for a, v in sorted(self.heap.items()))
        return "{" + st + ("; " + hp if hp else "") + "}"


@dataclass
class StateSpace:
    """A filtered finite set of initial states for one command and attacker."""

    program: S.Program
    cmd: object
    pre: object
    level: str
    values: tuple
    states: list
    pairs: dict  # major index -> sorted list of admissible minor indices
    direction: str = SOUND
    locks: frozenset = frozenset()

    @property
    def lattice(self):
        return self.program.lattice

    def evaluator(self) -> RelEval:
        return RelEval(self.lattice, self.level, list(self.values), _predicates(self.program))


def _predicates(program) -> dict:
    return {p.name: p for p in program.predicates}


def oracle_command(program: S.Program, proc: str | None = None):
    """The command under test and its precondition.

    A named procedure is used alone; otherwise a lone procedure, a procedure
    called ``main``, or the parallel composition of all procedures.
    """
    if proc is not None:
        procs = [program.proc(proc)]
    elif len(program.procs) == 1:
        procs = list(program.procs)
    elif any(p.name == "main" for p in program.procs):
        procs = [program.proc("main")]
    else:
        procs = list(program.procs)
    cmd = procs[-1].body
    for p in reversed(procs[:-1]):
        cmd = S.Par(S.ParBranch(p.requires, p.ensures, p.body), S.ParBranch(S.Emp(), S.Emp(), cmd))
    pre = S.star(*[p.requires for p in procs])
    params = []
    for p in procs:
        params += [x for x in p.params if x not in params]
    return cmd, pre, params


def _flatten_cells(a, program, out):
    if isinstance(a, S.Star):
        _flatten_cells(a.left, program, out)
        _flatten_cells(a.right, program, out)
    elif isinstance(a, S.Exists):
        _flatten_cells(a.body, program, out)
    elif isinstance(a, S.PredApp):
        from vdc.lang.subst import subst_assertion

        d = program.predicate(a.name)
        _flatten_cells(subst_assertion(d.body, dict(zip(d.params, a.args))), program, out)
    elif isinstance(a, S.PointsTo):
        out.append(a.addr)


def _range_for(ranges, name):
    if isinstance(ranges, dict):
        if name in ranges:
            return list(ranges[name])
        if None in ranges:
            return list(ranges[None])
        raise UsageError(f"no range given for {name!r}")
    lo, hi = ranges
    return list(range(lo, hi + 1))


def build_space(
    program: S.Program,
    ranges,
    *,
    level: str = "low",
    proc: str | None = None,
    direction: str = SOUND,
    max_states: int = 200_000,
) -> StateSpace:
    """Enumerate and filter initial states.

    ``ranges`` is ``(lo, hi)`` for every parameter and heap cell, or a dict
    from names (``"[addr]"`` for cells, ``None`` for the default) to values.
    """
    program.lattice.check(level)
    cmd, pre, params = oracle_command(program, proc)
    full_pre = S.star(pre, *[lk.invariant for lk in program.locks])
    variables = sorted(assigned_vars(cmd) | read_vars(cmd) | set(params))
    addr_exprs: list = []
    _flatten_cells(full_pre, program, addr_exprs)
    for a in addr_exprs:
        if free_vars(a) - set(variables):
            raise CapabilityError("heap address depends on a quantified variable; the oracle cannot lay out the heap")
    try:
        values = tuple(_range_for(ranges, None))
    except UsageError:
        values = ()
    param_doms = [_range_for(ranges, x) for x in params]
    candidates = []
    for pvals in product(*param_doms):
        store = {x: 0 for x in variables}
        store.update(zip(params, pvals))
        store = FMap(store)
        addrs = sorted({eval_expr(store, a, total=True) for a in addr_exprs})
        cell_doms = [_range_for(ranges, f"[{a}]") for a in addrs]
        for cvals in product(*cell_doms):
            candidates.append(InitState(store, FMap(dict(zip(addrs, cvals)))))
            if len(candidates) > max_states:
                raise CapabilityError(f"state space exceeds {max_states} candidate states")
    all_vals = set(values)
    for c in candidates:
        all_vals |= set(c.store.values()) | set(c.heap.values())
    ev = RelEval(program.lattice, level, sorted(all_vals), _predicates(program))
    sides = {}
    states = []
    for c in candidates:
        side = Side(c.store, c.heap, ())
        try:
            ok = ev.holds(side, side, full_pre)
        except DefinitionError:
            ok = False
        if ok:
            sides[len(states)] = side
            states.append(c)
    pairs = {}
    for i in range(len(states)):
        pairs[i] = [j for j in range(len(states)) if i == j or ev.holds(sides[i], sides[j], full_pre)]
    return StateSpace(
        program,
        cmd,
        full_pre,
        level,
        tuple(sorted(all_vals)),
        states,
        pairs,
        direction,
        frozenset(lk.name for lk in program.locks),
    )


def _parent(sigma):
    """``sigma`` without its last step (L/R prefixes belong to their step)."""
    ends = [i for i, a in enumerate(sigma) if not is_scheduling(a)]
    if not ends:
        return None
    return sigma[: ends[-2] + 1] if len(ends) > 1 else ()


@dataclass
class Oracle:
    """Run tables for every state of a space, plus the knowledge sets."""

    space: StateSpace
    bound: int
    max_nodes: int = DEFAULT_MAX_NODES
    schedules: list = field(default_factory=list)
    index: list = field(default_factory=list)
    truncated: bool = False

    def __post_init__(self):
        total = 0
        sp = self.space
        for st in sp.states:
            k0 = initial(sp.cmd, st.store, st.heap, sp.locks, ())
            rs = runs(k0, self.bound, max(0, self.max_nodes - total))
            if rs.truncated:
                self.truncated = True
                raise _Budget(f"more than {self.max_nodes} schedules")
            scheds = {sigma for sigma, _ in rs.pairs}
            total += len(scheds)
            if total > self.max_nodes:
                self.truncated = True
                raise _Budget(f"more than {self.max_nodes} schedules")
            idx: dict = {}
            for sigma in scheds:
                idx.setdefault(self.proj(sigma), []).append(sigma)
            self.schedules.append(sorted(scheds, key=lambda s: (len(s), str(s))))
            self.index.append(idx)
        self._u: dict = {}

    def proj(self, sigma):
        sp = self.space
        return project(sp.level, sigma, lattice=sp.lattice, direction=sp.direction)

    def _matching(self, j, sigma):
        return self.index[j].get(self.proj(sigma), ())

    def uncertainty(self, major: int, sigma) -> frozenset:
        key = (major, sigma)
        if key not in self._u:
            p = self.proj(sigma)
            self._u[key] = frozenset(j for j in self.space.pairs[major] if p in self.index[j])
        return self._u[key]

    def assumed_release(self, major: int, sigma) -> frozenset:
        idx = assume_indices(sigma)
        if not idx:
            return frozenset()
        sp = self.space
        out = set()
        for j in self.uncertainty(major, sigma):
            for s2 in self._matching(j, sigma):
                if any(
                    n < len(s2) and assumption_failed(sp.level, n, sigma, s2, lattice=sp.lattice, domain=list(sp.values))
                    for n in idx
                ):
                    out.add(j)
                    break
        return frozenset(out)

    def policy_release(self, major: int, policy: S.PolicyDecl, sigma) -> frozenset:
        sp = self.space
        out = set()
        for j in self.uncertainty(major, sigma):
            for s2 in self._matching(j, sigma):
                if any(
                    policy_excludes(sp.level, policy, n, sigma, s2, lattice=sp.lattice, domain=list(sp.values))
                    for n in range(len(sigma))
                ):
                    out.add(j)
                    break
        return frozenset(out)


class _Budget(Exception):
    pass


@dataclass
class Report:
    theorem: str
    status: str
    violations: list
    states_checked: int
    prefixes_checked: int
    detail: str = ""

    def to_json(self) -> dict:
        out = {
            "theorem": self.theorem,
            "status": self.status,
            "violations": self.violations,
            "states_checked": self.states_checked,
            "prefixes_checked": self.prefixes_checked,
        }
        if self.detail:
            out["detail"] = self.detail
        return out


def _violation(sp, major, sigma, minor, kind, ext=None) -> dict:
    v = {
        "major": sp.states[major].to_json(),
        "sigma": [action_to_json(a) for a in sigma],
        "minor": sp.states[minor].to_json(),
        "kind": kind,
        "level": sp.level,
    }
    if ext is not None:
        v["extension"] = [action_to_json(a) for a in ext]
    return v


def _sweep(space, bound, theorem, body, max_nodes, max_violations):
    try:
        orc = Oracle(space, bound, max_nodes)
    except _Budget as exc:
        return Report(theorem, BUDGET, [], 0, 0, str(exc))
    violations: list = []
    prefixes = 0
    for i in range(len(space.states)):
        for sigma in orc.schedules[i]:
            prefixes += 1
            body(orc, i, sigma, violations)
            if len(violations) >= max_violations:
                break
        if len(violations) >= max_violations:
            break
    status = FAIL if violations else PASS
    detail = "" if space.states else "no initial state in range satisfies the precondition"
    return Report(theorem, status, violations[:max_violations], len(space.states), prefixes, detail)


def check_policy_agnostic(program, space: StateSpace, bound: int, *, max_nodes=DEFAULT_MAX_NODES, max_violations=1000) -> Report:
    """Every knowledge gain in one step is covered by a failed assumption."""

    def body(orc, i, sigma, out):
        sigma1 = _parent(sigma)
        if sigma1 is None:
            return
        lost = orc.uncertainty(i, sigma1) - orc.uncertainty(i, sigma)
        if not lost:
            return
        bad = lost - orc.assumed_release(i, sigma1)
        for j in sorted(bad):
            out.append(_violation(space, i, sigma1, j, "uncertainty-decrease", sigma[len(sigma1):]))

    return _sweep(space, bound, "policy-agnostic", body, max_nodes, max_violations)


def check_policy_specific(program, policy: S.PolicyDecl, space: StateSpace, bound: int, *, max_nodes=DEFAULT_MAX_NODES, max_violations=1000) -> Report:
    """Assumed releases, and all knowledge gained, stay within the policy."""

    def body(orc, i, sigma, out):
        ar = orc.assumed_release(i, sigma)
        pr = orc.policy_release(i, policy, sigma) if ar else frozenset()
        for j in sorted(ar - pr):
            out.append(_violation(space, i, sigma, j, "assumed-release-outside-policy"))
        sigma1 = _parent(sigma)
        if sigma1 is None:
            return
        lost = orc.uncertainty(i, sigma1) - orc.uncertainty(i, sigma)
        if lost:
            bad = lost - orc.policy_release(i, policy, sigma1)
            for j in sorted(bad):
                out.append(_violation(space, i, sigma1, j, "knowledge-outside-policy", sigma[len(sigma1):]))

    return _sweep(space, bound, "policy-specific", body, max_nodes, max_violations)


def merge_reports(reports) -> Report:
    """Combine per-level reports of the same theorem (associative)."""
    reports = list(reports)
    status = PASS
    if any(r.status == FAIL for r in reports):
        status = FAIL
    elif any(r.status == BUDGET for r in reports):
        status = BUDGET
    return Report(
        reports[0].theorem,
        status,
        [v for r in reports for v in r.violations],
        sum(r.states_checked for r in reports),
        sum(r.prefixes_checked for r in reports),
        "; ".join(r.detail for r in reports if r.detail),
    )
