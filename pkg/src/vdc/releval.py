"""Two-state satisfaction of assertions, by structural recursion.

Existential (and universal) binders are searched over a finite witness
domain. Witnesses on the two sides are chosen independently. Before falling
back to the domain, the search tries witnesses forced by the formula itself:
the ghost trace for ``History(x)``, the heap cell for ``[a] |-> x`` and the
right-hand side of ``x == e``.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from itertools import combinations, product

from vdc.errors import CapabilityError, DefinitionError, SortError
from vdc.lang import syntax as S
from vdc.lang.evaluate import eval_expr, free_vars, truthy
from vdc.lang.lattice import Lattice
from vdc.lang.subst import subst_assertion
from vdc.lang.values import EMPTY, FMap


@dataclass(frozen=True)
class Side:
    """One half of a state pair."""

    store: Mapping
    heap: Mapping = EMPTY
    ghost: tuple = ()


@dataclass
class RelEval:
    lattice: Lattice
    level: str
    domain: object = None  # sequence, or mapping binder-name -> sequence (key None = default)
    predicates: Mapping = field(default_factory=dict)  # name -> PredDecl

    def __post_init__(self):
        self.lattice.check(self.level)

    # -- expressions --------------------------------------------------------

    def ev(self, store, e):
        try:
            return eval_expr(store, e, total=True, attacker=self.level)
        except TypeError as exc:  # a witness of the wrong sort
            raise SortError(f"ill-sorted evaluation: {exc}") from None

    def _candidates_default(self, name):
        d = self.domain
        if d is None:
            return None
        if isinstance(d, Mapping):
            if name in d:
                return list(d[name])
            if None in d:
                return list(d[None])
            return None
        return list(d)

    # -- pure ---------------------------------------------------------------

    def pure(self, s1, s2, a) -> bool:
        """Pure relational satisfaction; heaps are ignored."""
        if isinstance(a, S.Pure):
            return truthy(self.ev(s1, a.expr)) and truthy(self.ev(s2, a.expr))
        if isinstance(a, S.Classify):
            l1, l2 = self.ev(s1, a.level), self.ev(s2, a.level)
            if self.lattice.leq(l1, self.level) and self.lattice.leq(l2, self.level):
                return self.ev(s1, a.expr) == self.ev(s2, a.expr)
            return True
        if isinstance(a, S.Emp):
            return True
        if isinstance(a, S.Star):
            return self.pure(s1, s2, a.left) and self.pure(s1, s2, a.right)
        if isinstance(a, S.Implies):
            return (not self.pure(s1, s2, a.left)) or self.pure(s1, s2, a.right)
        if isinstance(a, (S.Exists, S.Forall)):
            return self._quant(Side(s1), Side(s2), a, lambda x1, x2: self.pure(x1.store, x2.store, a.body))
        if isinstance(a, (S.PointsTo, S.HistoryPred, S.PredApp)):
            raise DefinitionError("spatial assertion given to the pure evaluator")
        raise TypeError(a)

    # -- spatial ------------------------------------------------------------

    def holds(self, x1: Side, x2: Side, a) -> bool:
        if isinstance(a, (S.Pure, S.Classify, S.Emp)):
            return not x1.heap and not x2.heap and self.pure(x1.store, x2.store, a)
        if isinstance(a, S.PointsTo):
            return self._cell(x1, a) == dict(x1.heap) and self._cell(x2, a) == dict(x2.heap)
        if isinstance(a, S.HistoryPred):
            return (
                not x1.heap
                and not x2.heap
                and tuple(self.ev(x1.store, a.trace)) == tuple(x1.ghost)
                and tuple(self.ev(x2.store, a.trace)) == tuple(x2.ghost)
            )
        if isinstance(a, S.PredApp):
            return self.holds(x1, x2, self.unfold(a))
        if isinstance(a, S.Star):
            return self._star(x1, x2, S.conjuncts(a))
        if isinstance(a, S.Implies):
            return (not self.holds(x1, x2, a.left)) or self.holds(x1, x2, a.right)
        if isinstance(a, (S.Exists, S.Forall)):
            return self._quant(x1, x2, a, lambda y1, y2: self.holds(y1, y2, a.body))
        raise TypeError(a)

    def unfold(self, a: S.PredApp):
        if a.name not in self.predicates:
            raise DefinitionError(f"no definition registered for predicate {a.name!r}")
        d = self.predicates[a.name]
        if len(d.params) != len(a.args):
            raise DefinitionError(f"predicate {a.name} expects {len(d.params)} argument(s)")
        return subst_assertion(d.body, dict(zip(d.params, a.args)))

    def _cell(self, x: Side, a: S.PointsTo) -> dict:
        return {self.ev(x.store, a.addr): self.ev(x.store, a.value)}

    def _star(self, x1: Side, x2: Side, parts: list) -> bool:
        # only atoms are heap-free; a "pure" implication or quantifier may
        # still hold vacuously on a nonempty footprint
        pure = [p for p in parts if isinstance(p, _EMPTY_FOOTPRINT)]
        spatial = [p for p in parts if not isinstance(p, _EMPTY_FOOTPRINT)]
        if not all(self.pure(x1.store, x2.store, p) for p in pure):
            return False
        return self._partition(x1, x2, spatial)

    def _partition(self, x1: Side, x2: Side, parts: list) -> bool:
        if not parts:
            return not x1.heap and not x2.heap
        first, rest = parts[0], parts[1:]
        if isinstance(first, S.PointsTo):
            c1, c2 = self._cell(x1, first), self._cell(x2, first)
            (a1, v1), (a2, v2) = next(iter(c1.items())), next(iter(c2.items()))
            if x1.heap.get(a1, _MISSING) != v1 or x2.heap.get(a2, _MISSING) != v2:
                return False
            return self._partition(_drop(x1, {a1}), _drop(x2, {a2}), rest)
        if isinstance(first, S.HistoryPred):
            if not self.holds(Side(x1.store, EMPTY, x1.ghost), Side(x2.store, EMPTY, x2.ghost), first):
                return False
            return self._partition(x1, x2, rest)
        if isinstance(first, S.PredApp):
            return self._partition(x1, x2, S.conjuncts(self.unfold(first)) + rest)
        if isinstance(first, S.Star):
            return self._partition(x1, x2, S.conjuncts(first) + rest)
        # general case: try every footprint for ``first``
        for sub1 in _subheaps(x1.heap):
            for sub2 in _subheaps(x2.heap):
                y1 = Side(x1.store, sub1, x1.ghost)
                y2 = Side(x2.store, sub2, x2.ghost)
                if self.holds(y1, y2, first) and self._partition(
                    _drop(x1, set(sub1)), _drop(x2, set(sub2)), rest
                ):
                    return True
        return False

    # -- quantifiers --------------------------------------------------------

    def _quant(self, x1: Side, x2: Side, a, body_holds) -> bool:
        names = list(a.names)
        if isinstance(a, S.Forall):
            doms = []
            for n in names:
                d = self._candidates_default(n)
                if d is None:
                    raise CapabilityError(f"no witness domain for universally bound {n!r}")
                doms.append(d)
            for vals1 in product(*doms):
                for vals2 in product(*doms):
                    y1 = _bind(x1, names, vals1)
                    y2 = _bind(x2, names, vals2)
                    try:
                        if not body_holds(y1, y2):
                            return False
                    except SortError:
                        continue  # not an instance of the binder's sort
            return True
        hints = S.conjuncts(a.body)
        return self._exists(x1, x2, names, hints, body_holds)

    def _exists(self, x1, x2, names, hints, body_holds) -> bool:
        if not names:
            return body_holds(x1, x2)
        # bind the first name for which a forced witness can be computed
        order = sorted(names, key=lambda n: 0 if self._forced(x1, n, hints, names) is not None else 1)
        name = order[0]
        rest = [n for n in names if n != name]
        c1 = self._options(x1, name, hints, names)
        c2 = self._options(x2, name, hints, names)
        for v1 in c1:
            for v2 in c2:
                try:
                    if self._exists(_bind(x1, [name], [v1]), _bind(x2, [name], [v2]), rest, hints, body_holds):
                        return True
                except SortError:
                    continue  # witness of the wrong sort
        return False

    def _options(self, x: Side, name, hints, unbound) -> list:
        forced = self._forced(x, name, hints, unbound)
        if forced is not None:
            # a top-level conjunct pins the witness, so nothing else can work
            return list(dict.fromkeys(forced))
        default = self._candidates_default(name)
        if default is None:
            raise CapabilityError(f"no witness domain for existentially bound {name!r}")
        return list(dict.fromkeys(default))

    def _forced(self, x: Side, name, hints, unbound):
        """Witnesses for ``name`` dictated by a conjunct, or ``None``."""
        pending = set(unbound) - {name}
        found = []

        def ready(e):
            return not (free_vars(e) & pending) and name not in free_vars(e)

        for h in hints:
            try:
                if isinstance(h, S.HistoryPred) and h.trace == S.Var(name):
                    found.append(tuple(x.ghost))
                elif isinstance(h, S.PointsTo) and h.value == S.Var(name) and ready(h.addr):
                    addr = self.ev(x.store, h.addr)
                    if addr in x.heap:
                        found.append(x.heap[addr])
                elif isinstance(h, S.Pure) and isinstance(h.expr, S.BinOp) and h.expr.op == "==":
                    lhs, rhs = h.expr.left, h.expr.right
                    if lhs == S.Var(name) and ready(rhs):
                        found.append(self.ev(x.store, rhs))
                    elif rhs == S.Var(name) and ready(lhs):
                        found.append(self.ev(x.store, lhs))
            except DefinitionError:
                continue
        return found or None


_MISSING = object()
_EMPTY_FOOTPRINT = (S.Pure, S.Classify, S.Emp)


def _bind(x: Side, names, vals) -> Side:
    st = dict(x.store)
    st.update(zip(names, vals))
    return Side(FMap(st), x.heap, x.ghost)


def _drop(x: Side, addrs) -> Side:
    return Side(x.store, FMap({a: v for a, v in x.heap.items() if a not in addrs}), x.ghost)


def _subheaps(h: Mapping):
    keys = sorted(h)
    for r in range(len(keys) + 1):
        for combo in combinations(keys, r):
            yield FMap({k: h[k] for k in combo})


def _evaluator(level, lattice, domain, predicates) -> RelEval:
    lattice = lattice or Lattice.default()
    preds = predicates or {}
    if isinstance(preds, Sequence):
        preds = {p.name: p for p in preds}
    return RelEval(lattice, level, domain, preds)


def holds_pure(level, s1, s2, rho, *, lattice=None, domain=None) -> bool:
    """``s, s' |=_level rho`` for a pure relational assertion."""
    if not S.is_pure(rho):
        raise DefinitionError("holds_pure expects a pure assertion")
    return _evaluator(level, lattice, domain, None).pure(s1, s2, rho)


def holds(level, major: Side, minor: Side, P, *, lattice=None, domain=None, predicates=None) -> bool:
    """``(s,h),(s',h') |=_level P`` including heaps and ghost traces."""
    return _evaluator(level, lattice, domain, predicates).holds(major, minor, P)
