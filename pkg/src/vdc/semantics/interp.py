"""Small-step interpreter over run/stop/abort configurations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from vdc.errors import EvalFault
from vdc.lang import syntax as S
from vdc.lang.evaluate import eval_expr, truthy
from vdc.lang.values import HISTORY_KEY, FMap
from vdc.semantics.actions import (
    LEFT,
    RIGHT,
    TAU,
    AssumeAct,
    LoadAct,
    OutAct,
    StoreAct,
    TraceAct,
)


@dataclass(frozen=True)
class Run:
    locks: frozenset  # locks that are free
    cmd: Any
    store: FMap
    heap: FMap
    ghost: tuple = ()


@dataclass(frozen=True)
class Stop:
    locks: frozenset
    store: FMap
    heap: FMap
    ghost: tuple = ()


@dataclass(frozen=True)
class Abort:
    def __repr__(self):
        return "Abort()"


ABORT = Abort()


def initial(cmd, store, heap=(), locks=(), ghost=()) -> Run:
    return Run(frozenset(locks), cmd, FMap(store), FMap(heap), tuple(ghost))


def _ev(k: Run, e):
    return eval_expr(k.store, e)


def _stop(k: Run, **changes) -> Stop:
    return Stop(
        changes.get("locks", k.locks),
        changes.get("store", k.store),
        changes.get("heap", k.heap),
        changes.get("ghost", k.ghost),
    )


def _atomic(k: Run):
    """Successors of a non-compound command, or ``None`` if ``c`` is compound."""
    c = k.cmd
    try:
        if isinstance(c, (S.Skip, S.Assert, S.Split)):
            return {((TAU,), _stop(k))}
        if isinstance(c, S.Assign):
            return {((TAU,), _stop(k, store=k.store.set(c.var, _ev(k, c.expr))))}
        if isinstance(c, S.Load):
            p = _ev(k, c.addr)
            if p not in k.heap:
                return {((LoadAct(p),), ABORT)}
            return {((LoadAct(p),), _stop(k, store=k.store.set(c.var, k.heap[p])))}
        if isinstance(c, S.Store):
            p = _ev(k, c.addr)
            if p not in k.heap:
                return {((StoreAct(p),), ABORT)}
            try:
                v = _ev(k, c.value)
            except EvalFault:
                return {((StoreAct(p),), ABORT)}
            return {((StoreAct(p),), _stop(k, heap=k.heap.set(p, v)))}
        if isinstance(c, S.Lock):
            if c.name not in k.locks:
                return set()
            return {((TAU,), _stop(k, locks=k.locks - {c.name}))}
        if isinstance(c, S.Unlock):
            if c.name in k.locks:
                return set()
            return {((TAU,), _stop(k, locks=k.locks | {c.name}))}
        if isinstance(c, S.Assume):
            snap = k.store.set(HISTORY_KEY, k.ghost)
            return {((AssumeAct(snap, c.formula),), _stop(k))}
        if isinstance(c, S.Out):
            return {((OutAct(_ev(k, c.level), _ev(k, c.value)),), _stop(k))}
        if isinstance(c, S.TraceCmd):
            ev = _ev(k, c.event)
            return {((TraceAct(ev),), _stop(k, ghost=k.ghost + (ev,)))}
        if isinstance(c, S.If):
            branch = c.then if truthy(_ev(k, c.cond)) else c.orelse
            return {((TAU,), Run(k.locks, branch, k.store, k.heap, k.ghost))}
        if isinstance(c, S.While):
            if truthy(_ev(k, c.cond)):
                return {((TAU,), Run(k.locks, S.Seq(c.body, c), k.store, k.heap, k.ghost))}
            return {((TAU,), _stop(k))}
    except EvalFault:
        # the faulting step is internal; its payload could not be computed
        return {((TAU,), ABORT)}
    return None


def _with_cmd(k: Run, cmd) -> Run:
    return Run(k.locks, cmd, k.store, k.heap, k.ghost)


def step(k: Run) -> set:
    """All ``(schedule, successor)`` pairs of one small step from ``k``."""
    if not isinstance(k, Run):
        raise ValueError("step expects a running configuration")
    done = _atomic(k)
    if done is not None:
        return done
    c = k.cmd
    out = set()
    if isinstance(c, S.Seq):
        for sigma, k1 in step(_with_cmd(k, c.first)):
            if isinstance(k1, Abort):
                out.add((sigma, ABORT))
            elif isinstance(k1, Stop):
                out.add((sigma, Run(k1.locks, c.second, k1.store, k1.heap, k1.ghost)))
            else:
                out.add((sigma, _with_cmd(k1, S.Seq(k1.cmd, c.second))))
        return out
    if isinstance(c, S.Par):
        lhs, rhs = c.left.body, c.right.body
        for sigma, k1 in step(_with_cmd(k, lhs)):
            sched = (LEFT,) + sigma
            if isinstance(k1, Abort):
                out.add((sched, ABORT))
            elif isinstance(k1, Stop):
                out.add((sched, Run(k1.locks, rhs, k1.store, k1.heap, k1.ghost)))
            else:
                out.add((sched, _with_cmd(k1, _par(c, k1.cmd, rhs))))
        for sigma, k1 in step(_with_cmd(k, rhs)):
            sched = (RIGHT,) + sigma
            if isinstance(k1, Abort):
                out.add((sched, ABORT))
            elif isinstance(k1, Stop):
                out.add((sched, Run(k1.locks, lhs, k1.store, k1.heap, k1.ghost)))
            else:
                out.add((sched, _with_cmd(k1, _par(c, lhs, k1.cmd))))
        return out
    raise TypeError(f"cannot execute {c!r}")


def _par(c: S.Par, left, right) -> S.Par:
    return S.Par(
        S.ParBranch(c.left.pre, c.left.post, left),
        S.ParBranch(c.right.pre, c.right.post, right),
    )


@dataclass
class RunSet:
    """Result of :func:`runs`: reachable pairs plus a budget flag."""

    pairs: set
    budget_exceeded: bool
    truncated: bool = False  # stopped early at the node limit

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)

    def __contains__(self, item):
        return item in self.pairs

    def complete(self) -> set:
        """Pairs whose configuration cannot step further."""
        return {(s, k) for s, k in self.pairs if not isinstance(k, Run) or not step(k)}


def runs(k, max_steps: int, max_nodes: int | None = None) -> RunSet:
    """Every ``(schedule, config)`` reachable in at most ``max_steps`` steps.

    With ``max_nodes`` the search stops once more pairs than that were seen;
    the result is then marked ``truncated``.
    """
    if max_steps < 0:
        raise ValueError("max_steps must be nonnegative")
    seen = {((), k)}
    frontier = {((), k)}
    for _ in range(max_steps):
        nxt = set()
        for sigma, cfg in frontier:
            if not isinstance(cfg, Run):
                continue
            for s2, k2 in step(cfg):
                item = (sigma + s2, k2)
                if item not in seen:
                    seen.add(item)
                    nxt.add(item)
            if max_nodes is not None and len(seen) > max_nodes:
                return RunSet(seen, True, truncated=True)
        frontier = nxt
        if not frontier:
            break
    exceeded = any(isinstance(cfg, Run) and step(cfg) for _, cfg in frontier)
    return RunSet(seen, exceeded)
