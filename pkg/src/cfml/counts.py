"""Multiplicities: non-negative arbitrary-precision integers plus infinity.

A count is either a plain Python ``int`` (>= 0) or the singleton ``INF``.
``INF`` participates in arithmetic and comparisons so that ordinary
``+``, ``*``, ``min``, ``max``, ``sum`` and ``sorted`` work on mixed values:

* ``INF + x == INF`` for every count ``x``
* ``0 * INF == 0`` and ``x * INF == INF`` for ``x > 0``
* ``min(INF, x) == x`` and ``max(INF, x) == INF``
"""

from __future__ import annotations

from typing import Union


class _Infinity:
    """The single infinite multiplicity. Compare and combine with ints freely."""

    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "inf"

    def __bool__(self):
        return True

    def __hash__(self):
        return hash("cfml-infinity")

    def __eq__(self, other):
        return other is self

    def __ne__(self, other):
        return other is not self

    # Ordering: INF is strictly greater than every int.
    def __lt__(self, other):
        _check_operand(other)
        return False

    def __le__(self, other):
        _check_operand(other)
        return other is self

    def __gt__(self, other):
        _check_operand(other)
        return other is not self

    def __ge__(self, other):
        _check_operand(other)
        return True

    def __add__(self, other):
        _check_operand(other)
        return self

    __radd__ = __add__

    def __mul__(self, other):
        _check_operand(other)
        if other == 0:
            return 0
        return self

    __rmul__ = __mul__

    def __pow__(self, other):
        if not isinstance(other, int) or other < 0:
            return NotImplemented
        return 1 if other == 0 else self


def _check_operand(other):
    if not isinstance(other, (int, _Infinity)):
        raise TypeError(f"cannot combine a count with {type(other).__name__}")


INF = _Infinity()

Count = Union[int, _Infinity]


def is_count(value) -> bool:
    return value is INF or (isinstance(value, int) and not isinstance(value, bool) and value >= 0)


def star(c: Count) -> Count:
    """Closure of a scalar count: 1 + c + c^2 + ... in the counting semiring."""
    return 1 if c == 0 else INF


def count_to_str(c: Count) -> str:
    return "inf" if c is INF else str(c)


def count_from_str(text: str) -> Count:
    text = text.strip()
    if text == "inf":
        return INF
    try:
        value = int(text)
    except ValueError:
        raise ValueError(f"bad multiplicity {text!r}") from None
    if value < 0:
        raise ValueError(f"bad multiplicity {text!r}")
    return value
