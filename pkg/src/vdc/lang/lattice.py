"""Finite security lattices declared by a strict order on named levels."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

from vdc.errors import DefinitionError


@dataclass(frozen=True)
class Lattice:
    levels: tuple
    order: tuple  # declared (lower, upper) pairs
    _leq: frozenset = field(default=frozenset(), compare=False, repr=False)

    @classmethod
    def build(cls, levels, order) -> "Lattice":
        levels = tuple(levels)
        order = tuple(tuple(p) for p in order)
        if len(set(levels)) != len(levels):
            raise DefinitionError("duplicate level in lattice declaration")
        known = set(levels)
        for lo, hi in order:
            for name in (lo, hi):
                if name not in known:
                    raise DefinitionError(f"undeclared level {name!r} in lattice order")
        leq = {(a, a) for a in levels} | set(order)
        changed = True
        while changed:  # transitive closure
            changed = False
            for (a, b), (c, d) in product(list(leq), repeat=2):
                if b == c and (a, d) not in leq:
                    leq.add((a, d))
                    changed = True
        lat = cls(levels, order, frozenset(leq))
        lat._validate()
        return lat

    @classmethod
    def default(cls) -> "Lattice":
        return cls.build(("low", "high"), (("low", "high"),))

    def _validate(self) -> None:
        for a, b in product(self.levels, repeat=2):
            if a != b and (a, b) in self._leq and (b, a) in self._leq:
                raise DefinitionError(f"lattice order is cyclic between {a!r} and {b!r}")
        for name in ("low", "high"):
            if name not in self.levels:
                raise DefinitionError(f"lattice must declare {name!r}")
        for a in self.levels:
            if not self.leq("low", a):
                raise DefinitionError(f"'low' is not below {a!r}")
            if not self.leq(a, "high"):
                raise DefinitionError(f"{a!r} is not below 'high'")
        for a, b in product(self.levels, repeat=2):
            self.join(a, b)
            self.meet(a, b)

    def check(self, name: str) -> None:
        if name not in self.levels:
            raise DefinitionError(f"undeclared security level {name!r}")

    def leq(self, a: str, b: str) -> bool:
        self.check(a)
        self.check(b)
        return (a, b) in self._leq

    def join(self, a: str, b: str) -> str:
        ubs = [c for c in self.levels if self.leq(a, c) and self.leq(b, c)]
        least = [c for c in ubs if all(self.leq(c, d) for d in ubs)]
        if len(least) != 1:
            raise DefinitionError(f"no unique join of {a!r} and {b!r}")
        return least[0]

    def meet(self, a: str, b: str) -> str:
        lbs = [c for c in self.levels if self.leq(c, a) and self.leq(c, b)]
        greatest = [c for c in lbs if all(self.leq(d, c) for d in lbs)]
        if len(greatest) != 1:
            raise DefinitionError(f"no unique meet of {a!r} and {b!r}")
        return greatest[0]

    def leq_pairs(self) -> list:
        return sorted(self._leq, key=lambda p: (self.levels.index(p[0]), self.levels.index(p[1])))


def lattice_leq(lattice: Lattice, l1: str, l2: str) -> bool:
    return lattice.leq(l1, l2)
