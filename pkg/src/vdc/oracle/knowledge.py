"""Observation, alignment and release predicates over schedules."""

from __future__ import annotations

from vdc.errors import UsageError
from vdc.lang import syntax as S
from vdc.lang.lattice import Lattice
from vdc.lang.values import FMap
from vdc.releval import RelEval
from vdc.semantics.actions import TAU, AssumeAct, Left, OutAct, Right, TraceAct, trace_of

SOUND, PAPER = "sound", "paper"


def channel_visible(lattice: Lattice, level: str, channel: str, direction: str = SOUND) -> bool:
    """Whether output on ``channel`` is seen by an attacker at ``level``."""
    if direction == PAPER:
        return lattice.leq(level, channel)
    return lattice.leq(channel, level)


def visible(level: str, a, *, lattice: Lattice | None = None, direction: str = SOUND):
    lattice = lattice or Lattice.default()
    if isinstance(a, (AssumeAct, TraceAct)):
        return TAU
    if isinstance(a, OutAct):
        return a if channel_visible(lattice, level, a.level, direction) else TAU
    return a


def project(level, sigma, *, lattice=None, direction=SOUND) -> tuple:
    lattice = lattice or Lattice.default()
    return tuple(visible(level, a, lattice=lattice, direction=direction) for a in sigma)


def obs_equiv(level, sigma, sigma2, *, lattice=None, direction=SOUND) -> bool:
    if len(sigma) != len(sigma2):
        return False
    return project(level, sigma, lattice=lattice, direction=direction) == project(
        level, sigma2, lattice=lattice, direction=direction
    )


def _aligned_action(level, a, b, lattice, direction) -> bool:
    if isinstance(a, AssumeAct):
        return isinstance(b, AssumeAct) and a.formula == b.formula
    if isinstance(a, TraceAct):
        return isinstance(b, TraceAct)
    if isinstance(a, OutAct):
        if not isinstance(b, OutAct) or a.level != b.level:
            return False
        return a.value == b.value or not channel_visible(lattice, level, a.level, direction)
    return a == b


def aligned(level, sigma, sigma2, *, lattice=None, direction=SOUND) -> bool:
    lattice = lattice or Lattice.default()
    if len(sigma) != len(sigma2):
        return False
    return all(_aligned_action(level, a, b, lattice, direction) for a, b in zip(sigma, sigma2))


def assumption_failed(level, n: int, sigma, sigma2, *, lattice=None, domain=None) -> bool:
    if not (0 <= n < len(sigma) and n < len(sigma2)):
        raise UsageError(f"action index {n} outside schedules of length {len(sigma)} and {len(sigma2)}")
    a, b = sigma[n], sigma2[n]
    if not (isinstance(a, AssumeAct) and isinstance(b, AssumeAct) and a.formula == b.formula):
        return False
    ev = RelEval(lattice or Lattice.default(), level, domain)
    return not ev.pure(a.store, b.store, a.formula)


def assume_indices(sigma) -> list:
    return [i for i, a in enumerate(sigma) if isinstance(a, AssumeAct)]


def desugar_policy(policy: S.PolicyDecl):
    """``(when, release)`` with auxiliary parameters quantified away."""
    if not policy.params:
        return policy.when, policy.release
    names = tuple(policy.params)
    return S.Exists(names, policy.when), S.Forall(names, S.Implies(policy.when, policy.release))


def policy_excludes(level, policy: S.PolicyDecl, n: int, sigma, sigma2, *, lattice=None, domain=None) -> bool:
    """Both length-``n`` prefixes meet the condition but disagree on the release."""
    if not (0 <= n < len(sigma) and n < len(sigma2)):
        raise UsageError(f"prefix length {n} outside schedules of length {len(sigma)} and {len(sigma2)}")
    when, release = desugar_policy(policy)
    s1 = FMap({policy.trace_var: trace_of(sigma[:n])})
    s2 = FMap({policy.trace_var: trace_of(sigma2[:n])})
    ev = RelEval(lattice or Lattice.default(), level, domain)
    return ev.pure(s1, s2, when) and not ev.pure(s1, s2, release)


def is_scheduling(a) -> bool:
    return isinstance(a, (Left, Right))
