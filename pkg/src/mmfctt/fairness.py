"""Leximax comparison of penalty multisets and their exact ranking.

Allocations are compared by sorting their entries in non-increasing order and
comparing the sorted sequences lexicographically; the smaller sequence is the
fairer allocation.  For a fixed length ``n`` the sorted sequences are mapped
onto ``0, 1, 2, ...`` by :func:`rank`, which makes averaging and rank based
statistics possible.  Everything here uses exact integers.
"""

from __future__ import annotations

import re
from collections import Counter
from fractions import Fraction
from math import comb
from typing import Iterable, Sequence

__all__ = [
    "WeightMultiset",
    "leximax_compare",
    "leximax_key",
    "sort_allocation",
    "rank",
    "rank_recursive",
    "unrank",
    "rho_min",
    "rho_max",
    "average_allocation",
    "format_compressed",
    "parse_compressed",
]

LESS, EQUAL, GREATER = -1, 0, 1


class WeightMultiset:
    """Finite multiset of natural-number penalties.

    Stored as its non-increasing sequence, so equality and hashing ignore
    insertion order.
    """

    __slots__ = ("_items",)

    def __init__(self, items: Iterable[int] = ()):
        values = tuple(sorted((int(x) for x in items), reverse=True))
        if values and values[-1] < 0:
            raise ValueError(f"penalties must be natural numbers, got {values[-1]}")
        self._items = values

    @property
    def items(self) -> tuple[int, ...]:
        return self._items

    def sorted(self) -> tuple[int, ...]:
        return self._items

    def counts(self) -> Counter:
        return Counter(self._items)

    def __or__(self, other: WeightMultiset) -> WeightMultiset:
        return WeightMultiset(self._items + other._items)

    __add__ = __or__

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def __eq__(self, other) -> bool:
        if isinstance(other, WeightMultiset):
            return self._items == other._items
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._items)

    def __repr__(self) -> str:
        return "WeightMultiset({" + ", ".join(map(str, self._items)) + "})"


def sort_allocation(values: Iterable[int]) -> tuple[int, ...]:
    """Return the entries of an allocation in non-increasing order."""
    return tuple(sorted(values, reverse=True))


def leximax_compare(a: Sequence[int], b: Sequence[int]) -> int:
    """Compare two non-increasing sequences; ``-1`` means ``a`` is fairer.

    Sequences may differ in length: a proper prefix precedes its extensions,
    which is the same as padding the shorter one with minus infinity.
    """
    for x, y in zip(a, b):
        if x != y:
            return LESS if x < y else GREATER
    if len(a) == len(b):
        return EQUAL
    return LESS if len(a) < len(b) else GREATER


def leximax_key(values: Iterable[int]) -> tuple[int, ...]:
    """Sort key under which ``min`` picks the fairest allocation."""
    return sort_allocation(values)


def _check_sorted(s: Sequence[int]) -> None:
    for i in range(len(s) - 1):
        if s[i] < s[i + 1]:
            raise ValueError(f"sequence is not non-increasing at position {i}: {tuple(s)}")
    if s and s[-1] < 0:
        raise ValueError("entries must be natural numbers")


def rank(s: Sequence[int]) -> int:
    """Number of non-increasing sequences of length ``len(s)`` below ``s``.

    Closed form ``sum_i C(n + x_i - i, x_i - 1)`` with 1-based ``i``; a zero
    entry contributes nothing.
    """
    _check_sorted(s)
    n = len(s)
    total = 0
    for i, x in enumerate(s, start=1):
        if x > 0:
            total += comb(n + x - i, x - 1)
    return total


def _count_below_head(x: int, length: int) -> int:
    # sorted sequences of this length whose entries are all < x
    # = multisets of size `length` drawn from {0, ..., x-1}
    if x <= 0:
        return 0
    return comb(length + x - 1, length)


def rank_recursive(s: Sequence[int]) -> int:
    """Rank via ``r(x1..xn) = r(x2..xn) + r(x1, 0, ..., 0)``.

    Kept separate from :func:`rank` so the two can check each other.
    """
    _check_sorted(s)
    total = 0
    for i in range(len(s)):
        total += _count_below_head(s[i], len(s) - i)
    return total


def unrank(r: int, n: int) -> tuple[int, ...]:
    """Inverse of :func:`rank` for sequences of length ``n``."""
    if r < 0:
        raise ValueError("rank must be non-negative")
    if n < 1:
        raise ValueError("length must be at least 1")
    remaining = r
    out = []
    bound = None
    for i in range(n):
        length = n - i
        # largest x (<= bound) with _count_below_head(x, length) <= remaining
        if bound is None:
            hi = 1
            while _count_below_head(hi, length) <= remaining:
                hi *= 2
        else:
            hi = bound + 1
            if _count_below_head(hi - 1, length) <= remaining:
                hi = bound
                out.append(hi)
                remaining -= _count_below_head(hi, length)
                continue
        lo = 0  # invariant: f(lo) <= remaining < f(hi)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if _count_below_head(mid, length) <= remaining:
                lo = mid
            else:
                hi = mid
        out.append(lo)
        remaining -= _count_below_head(lo, length)
        bound = lo
    if remaining != 0:
        raise ArithmeticError(f"unrank left residue {remaining} for rank {r}, n={n}")
    result = tuple(out)
    assert rank(result) == r
    return result


def rho_min(x: Iterable[int]) -> int:
    """Order isomorphism for minimisation: rank of the non-increasing form."""
    return rank(sort_allocation(x))


def rho_max(x: Iterable[int], value_cap: int) -> int:
    """Order isomorphism for maximisation problems.

    ``value_cap`` is the largest attainable value; the non-decreasing form of
    ``x`` is subtracted from the constant sequence ``value_cap`` and ranked.
    """
    ascending = sorted(x)
    if ascending and ascending[-1] > value_cap:
        raise ValueError(f"item {ascending[-1]} exceeds value cap {value_cap}")
    if ascending and ascending[0] < 0:
        raise ValueError("entries must be natural numbers")
    return rank(tuple(value_cap - v for v in ascending))


def average_allocation(xs: Sequence[Sequence[int]], n: int | None = None) -> tuple[int, ...]:
    """Average allocation: mean of ranks, rounded half up, mapped back."""
    if not xs:
        raise ValueError("cannot average an empty list of allocations")
    if n is None:
        n = len(xs[0])
    ranks = []
    for x in xs:
        if len(x) != n:
            raise ValueError(f"allocation of length {len(x)} where {n} was expected")
        ranks.append(rho_min(x))
    mean = Fraction(sum(ranks), len(ranks))
    rounded = (mean + Fraction(1, 2)).__floor__()
    return unrank(rounded, n)


def format_compressed(values: Sequence[int], latex: bool = False, truncated: bool = False) -> str:
    """Compressed notation: ``(6,5,5,5,0,0)`` -> ``"6,5^3,0^2"``.

    With ``latex=True`` exponents are braced (``5^{3}``).
    """
    _check_sorted(values)
    parts = []
    i = 0
    while i < len(values):
        j = i
        while j < len(values) and values[j] == values[i]:
            j += 1
        count = j - i
        if count == 1:
            parts.append(str(values[i]))
        elif latex:
            parts.append(f"{values[i]}^{{{count}}}")
        else:
            parts.append(f"{values[i]}^{count}")
        i = j
    if truncated:
        parts.append(r"\ldots" if latex else "...")
    return ",".join(parts)


_TOKEN = re.compile(r"^(\d+)(?:\^\{?(\d+)\}?)?$")


def parse_compressed(text: str, partial: bool = False) -> tuple[int, ...]:
    """Parse compressed notation back into the non-increasing sequence.

    Accepts plain (``5^2``) and braced (``5^{2}``) exponents, surrounding
    ``$`` and a ``\\bf`` prefix.  A trailing ``...`` / ``\\ldots`` marks a
    truncated entry and is rejected unless ``partial`` is set, in which case
    the listed prefix is returned.
    """
    body = text.strip().strip("$").strip()
    if body.startswith(r"\bf"):
        body = body[3:].strip()
    tokens = [t.strip() for t in body.split(",")]
    if tokens and tokens[-1] in ("...", r"\ldots"):
        if not partial:
            raise ValueError(f"truncated allocation: {text!r}")
        tokens = tokens[:-1]
    out: list[int] = []
    for tok in tokens:
        m = _TOKEN.match(tok)
        if m is None:
            raise ValueError(f"bad allocation token {tok!r} in {text!r}")
        count = int(m.group(2)) if m.group(2) is not None else 1
        if count < 1:
            raise ValueError(f"non-positive multiplicity in {tok!r}")
        out.extend([int(m.group(1))] * count)
    _check_sorted(out)
    return tuple(out)


def is_truncated(text: str) -> bool:
    body = text.strip().strip("$").rstrip()
    return body.endswith("...") or body.endswith(r"\ldots")
