"""Runtime values: integers, booleans, level names, events and traces.

Traces are tuples of :class:`Event`. Stores and heaps are :class:`FMap`, an
immutable hashable mapping so configurations can live in sets.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

HISTORY_KEY = "$history"


@dataclass(frozen=True, order=True)
class Event:
    ctor: str
    fields: tuple

    def __str__(self) -> str:
        return f"{self.ctor}({', '.join(map(str, self.fields))})"


class FMap(Mapping):
    """Immutable mapping with value semantics."""

    __slots__ = ("_d", "_h")

    def __init__(self, data=()):
        self._d = dict(data)
        self._h = None

    def __getitem__(self, k):
        return self._d[k]

    def __iter__(self):
        return iter(self._d)

    def __len__(self):
        return len(self._d)

    def __hash__(self):
        if self._h is None:
            self._h = hash(frozenset(self._d.items()))
        return self._h

    def __eq__(self, other):
        if isinstance(other, FMap):
            return self._d == other._d
        if isinstance(other, Mapping):
            return self._d == dict(other)
        return NotImplemented

    def set(self, k, v) -> "FMap":
        d = dict(self._d)
        d[k] = v
        return FMap(d)

    def remove(self, k) -> "FMap":
        d = dict(self._d)
        del d[k]
        return FMap(d)

    def __repr__(self):
        inner = ", ".join(f"{k}: {v!r}" for k, v in sorted(self._d.items(), key=lambda kv: str(kv[0])))
        return "{" + inner + "}"


EMPTY = FMap()


def heap_union(h1: Mapping, h2: Mapping):
    """Disjoint union; ``None`` when the domains overlap."""
    if set(h1) & set(h2):
        return None
    d = dict(h1)
    d.update(h2)
    return FMap(d)


def value_to_json(v):
    if isinstance(v, bool):
        return v
    if isinstance(v, int):
        return v
    if isinstance(v, str):
        return {"level": v}
    if isinstance(v, Event):
        return {"event": v.ctor, "fields": list(v.fields)}
    if isinstance(v, tuple):
        return {"trace": [value_to_json(e) for e in v]}
    raise TypeError(v)


def render_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return "<" + ", ".join(map(str, v)) + ">"
    return str(v)


def render_store(s: Mapping) -> str:
    items = sorted((k, v) for k, v in s.items() if k != HISTORY_KEY)
    return "{" + ", ".join(f"{k}: {render_value(v)}" for k, v in items) + "}"
