"""Finite-support multisets with multiplicities in the counting domain.

A :class:`Multiset` maps elements to counts (``int >= 1`` or ``INF``); an
absent element has count 0.  Values are treated as immutable: every
operation returns a new multiset.  Elements may be anything hashable;
languages use strings or :class:`~cfml.grammar.SymString` values.
"""

from __future__ import annotations

import numbers
from typing import Callable, Iterable, Mapping

from .counts import INF, Count, count_to_str, is_count

COMBINE_MODES = ("union", "intersection", "msum", "mdot")


def canonical_key(elem):
    """Sort key giving the canonical element order used for serialization.

    Numbers sort by value; strings and sequences by (length, content).
    """
    if isinstance(elem, numbers.Number):
        return (0, elem, "")
    if isinstance(elem, str):
        return (1, (len(elem), elem), "")
    try:
        return (2, (len(elem), tuple(canonical_key(x) for x in elem)), "")
    except TypeError:
        return (3, 0, repr(elem))


class Multiset:
    """An immutable multiset with counts in N ∪ {INF}."""

    __slots__ = ("_entries",)

    def __init__(self, elements: Iterable = ()):
        entries = {}
        for x in elements:
            entries[x] = entries.get(x, 0) + 1
        self._entries = entries

    @classmethod
    def from_counts(cls, counts: Mapping | Iterable[tuple]) -> "Multiset":
        ms = cls()
        items = counts.items() if isinstance(counts, Mapping) else counts
        entries = {}
        for elem, c in items:
            if not is_count(c):
                raise ValueError(f"bad multiplicity {c!r} for {elem!r}")
            if c == 0:
                continue
            prior = entries.get(elem, 0)
            entries[elem] = prior + c
        ms._entries = entries
        return ms

    @classmethod
    def _raw(cls, entries: dict) -> "Multiset":
        ms = cls()
        ms._entries = entries
        return ms

    # -- basic queries ---------------------------------------------------

    def count(self, elem) -> Count:
        return self._entries.get(elem, 0)

    __getitem__ = count

    def __contains__(self, elem) -> bool:
        return elem in self._entries

    def __iter__(self):
        return iter(self._entries)

    def items(self):
        return self._entries.items()

    def items_sorted(self):
        return sorted(self._entries.items(), key=lambda kv: canonical_key(kv[0]))

    def __bool__(self):
        return bool(self._entries)

    def support_size(self) -> int:
        return len(self._entries)

    def cardinality(self) -> Count:
        """Total number of elements counted with multiplicity (may be INF)."""
        total: Count = 0
        for c in self._entries.values():
            total = total + c
        return total

    @property
    def is_set(self) -> bool:
        return all(c == 1 for c in self._entries.values())

    def __eq__(self, other):
        if not isinstance(other, Multiset):
            return NotImplemented
        return self._entries == other._entries

    def __ne__(self, other):
        eq = self.__eq__(other)
        return NotImplemented if eq is NotImplemented else not eq

    def __repr__(self):
        inner = ", ".join(
            f"{count_to_str(c)}*{elem!r}" for elem, c in self.items_sorted()
        )
        return f"Multiset({{{inner}}})"

    # -- the pointwise algebra -------------------------------------------

    def support(self) -> "Multiset":
        """The underlying set: every present element with count 1."""
        return Multiset._raw({x: 1 for x in self._entries})

    def union(self, other: "Multiset") -> "Multiset":
        entries = dict(self._entries)
        for x, c in other._entries.items():
            entries[x] = max(entries.get(x, 0), c)
        return Multiset._raw(entries)

    def intersection(self, other: "Multiset") -> "Multiset":
        entries = {}
        for x, c in self._entries.items():
            m = min(c, other._entries.get(x, 0))
            if m != 0:
                entries[x] = m
        return Multiset._raw(entries)

    def msum(self, other: "Multiset") -> "Multiset":
        """Multiset sum: counts add."""
        entries = dict(self._entries)
        for x, c in other._entries.items():
            entries[x] = entries.get(x, 0) + c
        return Multiset._raw(entries)

    def mdot(self, other: "Multiset") -> "Multiset":
        """Multiplicity product: counts multiply pointwise."""
        entries = {}
        for x, c in self._entries.items():
            oc = other._entries.get(x, 0)
            p = c * oc
            if p != 0:
                entries[x] = p
        return Multiset._raw(entries)

    def combine(self, other: "Multiset", mode: str) -> "Multiset":
        if mode not in COMBINE_MODES:
            raise ValueError(f"unknown combine mode {mode!r}")
        return getattr(self, mode)(other)

    __or__ = union
    __and__ = intersection
    __add__ = msum

    def subset(self, other: "Multiset") -> bool:
        return all(c <= other._entries.get(x, 0) for x, c in self._entries.items())

    __le__ = subset

    def similar(self, other: "Multiset") -> bool:
        """True when both multisets have the same support."""
        return self._entries.keys() == other._entries.keys()

    # -- element-level constructions -------------------------------------

    def scale(self, factor: Count) -> "Multiset":
        if not is_count(factor):
            raise ValueError(f"bad multiplicity {factor!r}")
        if factor == 0:
            return Multiset()
        entries = {x: c * factor for x, c in self._entries.items()}
        return Multiset._raw(entries)

    def map_elements(self, fn: Callable) -> "Multiset":
        entries = {}
        for x, c in self._entries.items():
            y = fn(x)
            entries[y] = entries.get(y, 0) + c
        return Multiset._raw(entries)

    def pairwise(self, other: "Multiset", op: Callable) -> "Multiset":
        """All op(a, b) over the two index multisets; counts multiply."""
        entries = {}
        for a, ca in self._entries.items():
            for b, cb in other._entries.items():
                y = op(a, b)
                c = ca * cb
                if c != 0:
                    entries[y] = entries.get(y, 0) + c
        return Multiset._raw(entries)

    def npower(self, n: int, op: Callable, identity) -> "Multiset":
        """n-fold pairwise combination; n == 0 gives the singleton identity."""
        if n < 0:
            raise ValueError("npower requires n >= 0")
        result = Multiset([identity])
        for _ in range(n):
            result = result.pairwise(self, op)
        return result

    def elementwise_power(self, n: int) -> "Multiset":
        """{a^n for a in A}: numbers are exponentiated, sequences repeated."""
        if n < 0:
            raise ValueError("elementwise_power requires n >= 0")

        def powered(x):
            if isinstance(x, numbers.Number):
                return x ** n
            return x * n

        return self.map_elements(powered)

    def indexed_msum(self, family) -> "Multiset":
        """Multiset sum of family[x] over the index multiset.

        Each family member is included once per occurrence of its index, so
        an index with count k contributes k copies (count INF contributes an
        infinite scale factor).
        """
        result = Multiset()
        for x, c in self._entries.items():
            member = family[x] if not callable(family) else family(x)
            result = result.msum(member.scale(c))
        return result

    def star(self, maxlen: int) -> "Multiset":
        """All concatenations of elements, restricted to length <= maxlen.

        Elements must be sequences (strings or SymStrings).  The count of a
        string is its number of ordered factorizations.  If the empty string
        is an element, every producible string has count INF.
        """
        if maxlen < 0:
            raise ValueError("star requires maxlen >= 0")
        empty = None
        for x in self._entries:
            empty = x[:0]
            break
        if empty is None:
            empty = ""

        eps_count = self._entries.get(empty, 0)
        pieces = [(x, c) for x, c in self._entries.items() if len(x) > 0 and len(x) <= maxlen]

        # Grow the reachable set, shortest strings first.
        reachable = {empty}
        frontier = [empty]
        while frontier:
            base = frontier.pop()
            for piece, _ in pieces:
                ext = base + piece
                if len(ext) <= maxlen and ext not in reachable:
                    reachable.add(ext)
                    frontier.append(ext)

        if eps_count != 0:
            return Multiset._raw({x: INF for x in reachable})

        # Count factorizations by the last factor, shortest targets first.
        counts = {empty: 1}
        for s in sorted(reachable, key=len):
            if s == empty:
                continue
            total = 0
            for piece, c in pieces:
                k = len(piece)
                if len(s) >= k and s[-k:] == piece:
                    prefix = s[:-k]
                    sub = counts.get(prefix, 0)
                    total = total + c * sub
            if total != 0:
                counts[s] = total
        return Multiset._raw(counts)


def render_multiset(ms: Multiset, render_elem=None) -> str:
    """One entry per line: ``MULTIPLICITY * ELEMENT`` in canonical order."""
    if render_elem is None:
        render_elem = _default_render
    lines = [
        f"{count_to_str(c)} * {render_elem(elem)}" for elem, c in ms.items_sorted()
    ]
    return "\n".join(lines)


def _default_render(elem) -> str:
    if isinstance(elem, str):
        return elem if elem else "_"
    if hasattr(elem, "render"):
        return elem.render()
    return str(elem)
