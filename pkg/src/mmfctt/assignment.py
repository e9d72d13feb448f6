"""Exact assignment solvers: sum objective and generalized leximax objective.

The generalized lexicographic bottleneck problem gives every edge a multiset
of penalties; the weight of a perfect matching is the disjoint union of its
edges' multisets and matchings are compared by leximax.  It is solved by
encoding each multiset as a vector of multiplicities over the distinct
penalty values (largest value first) and running the Hungarian method over
those vectors with component-wise arithmetic and lexicographic comparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Iterable, Sequence

import numpy as np

from mmfctt._backend import core
from mmfctt.fairness import LESS, WeightMultiset, leximax_compare

__all__ = [
    "FORBIDDEN",
    "InfeasibleAssignment",
    "Matching",
    "GlbopInstance",
    "VectorCost",
    "solve_lsap",
    "distinct_values",
    "encode_vector",
    "solve_glbop",
    "solve_lbap",
    "brute_force_glbop",
    "BRUTE_FORCE_LIMIT",
]

BRUTE_FORCE_LIMIT = 8

InfeasibleAssignment = core.InfeasibleAssignment


class _Forbidden:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "FORBIDDEN"


FORBIDDEN = _Forbidden()
"""Edge marker: the edge may not be part of any matching."""


@dataclass(frozen=True)
class Matching:
    """``sigma[i]`` is the column of row ``i``; ``None`` marks a dummy column."""

    sigma: tuple

    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i, j in enumerate(self.sigma) if j is not None]

    def __len__(self) -> int:
        return len(self.sigma)


class VectorCost(tuple):
    """Multiplicity vector; addition is component-wise, order lexicographic."""

    def __add__(self, other):
        if len(self) != len(other):
            raise ValueError("vector length mismatch")
        return VectorCost(a + b for a, b in zip(self, other))

    def __sub__(self, other):
        if len(self) != len(other):
            raise ValueError("vector length mismatch")
        return VectorCost(a - b for a, b in zip(self, other))

    @classmethod
    def zero(cls, t: int) -> VectorCost:
        return cls((0,) * t)


@dataclass(frozen=True)
class GlbopInstance:
    """Bipartite instance with a penalty multiset (or ``FORBIDDEN``) per edge.

    Rows and columns may differ in number; the solvers pad with empty edges.
    """

    weights: tuple

    def __init__(self, weights: Sequence[Sequence]):
        rows = []
        width = None
        for row in weights:
            cells = tuple(w if w is FORBIDDEN or isinstance(w, WeightMultiset)
                          else WeightMultiset(w) for w in row)
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise ValueError("all rows must have the same number of columns")
            rows.append(cells)
        object.__setattr__(self, "weights", tuple(rows))

    @property
    def n_rows(self) -> int:
        return len(self.weights)

    @property
    def n_cols(self) -> int:
        return len(self.weights[0]) if self.weights else 0

    @property
    def size(self) -> int:
        return max(self.n_rows, self.n_cols)

    def weight(self, i: int, j: int):
        if i < self.n_rows and j < self.n_cols:
            return self.weights[i][j]
        return WeightMultiset()

    def padded(self, n: int | None = None) -> GlbopInstance:
        n = self.size if n is None else n
        return GlbopInstance([[self.weight(i, j) for j in range(n)] for i in range(n)])


def _canonical_tail(n: int) -> np.ndarray:
    # row i, column j contributes j at component i: the summed vector ends in
    # (sigma(0), ..., sigma(n-1)), so ties resolve to the smallest permutation
    tail = np.zeros((n, n, n), dtype=np.int64)
    for i in range(n):
        tail[i, :, i] = np.arange(n)
    return tail


def _as_matching(perm: np.ndarray, n_rows: int, n_cols: int) -> Matching:
    return Matching(tuple(int(perm[i]) if perm[i] < n_cols else None for i in range(n_rows)))


def solve_lsap(cost, canonical: bool = True, allowed=None) -> tuple[Matching, int]:
    """Minimum-sum assignment.

    ``cost`` is a (possibly rectangular) matrix of naturals; missing entries
    are padded with zeros.  With ``canonical`` the lexicographically smallest
    optimal permutation is returned.
    """
    c = np.asarray(cost, dtype=np.int64)
    if c.ndim != 2:
        raise ValueError("cost must be a matrix")
    n_rows, n_cols = c.shape
    n = max(n_rows, n_cols)
    if n == 0:
        return Matching(()), 0
    square = np.zeros((n, n), dtype=np.int64)
    square[:n_rows, :n_cols] = c
    tensor = square[:, :, None]
    if canonical:
        tensor = np.concatenate([tensor, _canonical_tail(n)], axis=2)
    mask = None
    if allowed is not None:
        mask = np.ones((n, n), dtype=np.uint8)
        mask[:n_rows, :n_cols] = np.asarray(allowed, dtype=np.uint8)
    perm = core.solve_lvap(tensor, mask)
    total = int(sum(square[i, perm[i]] for i in range(n)))
    return _as_matching(perm, n_rows, n_cols), total


def distinct_values(g: GlbopInstance) -> list[int]:
    """All penalty values occurring on any edge, largest first."""
    values = set()
    for row in g.weights:
        for w in row:
            if w is not FORBIDDEN:
                values.update(w.items)
    return sorted(values, reverse=True)


def encode_vector(w: Iterable[int], values: Sequence[int]) -> VectorCost:
    """Multiplicity of each of ``values`` (largest first) in ``w``."""
    position = {v: j for j, v in enumerate(values)}
    counts = [0] * len(values)
    for x in w:
        try:
            counts[position[x]] += 1
        except KeyError:
            raise ValueError(f"value {x} is not in the value list") from None
    return VectorCost(counts)


def _glbop_tensor(g: GlbopInstance, canonical: bool):
    n = g.size
    values = distinct_values(g)
    t = max(len(values), 1)
    tensor = np.zeros((n, n, t), dtype=np.int64)
    mask = np.ones((n, n), dtype=np.uint8)
    for i in range(n):
        for j in range(n):
            w = g.weight(i, j)
            if w is FORBIDDEN:
                mask[i, j] = 0
            elif len(w):
                tensor[i, j, :len(values)] = encode_vector(w, values)
    if canonical:
        tensor = np.concatenate([tensor, _canonical_tail(n)], axis=2)
    return tensor, (mask if not mask.all() else None)


def _union(g: GlbopInstance, matching: Matching) -> WeightMultiset:
    items: list[int] = []
    for i, j in matching.pairs():
        items.extend(g.weights[i][j].items)
    return WeightMultiset(items)


def solve_glbop(g: GlbopInstance, canonical: bool = True) -> tuple[Matching, WeightMultiset]:
    """Perfect matching whose combined multiset is leximax-minimal."""
    if not isinstance(g, GlbopInstance):
        g = GlbopInstance(g)
    if g.size == 0:
        return Matching(()), WeightMultiset()
    tensor, mask = _glbop_tensor(g, canonical)
    perm = core.solve_lvap(tensor, mask)
    matching = _as_matching(perm, g.n_rows, g.n_cols)
    return matching, _union(g, matching)


def solve_lbap(cost, canonical: bool = True) -> tuple[Matching, tuple[int, ...]]:
    """Lexicographic bottleneck assignment for a scalar cost matrix."""
    c = np.asarray(cost, dtype=np.int64)
    g = GlbopInstance([[WeightMultiset([int(x)]) for x in row] for row in c])
    matching, weight = solve_glbop(g, canonical=canonical)
    return matching, weight.sorted()


def brute_force_glbop(g: GlbopInstance) -> tuple[Matching, WeightMultiset]:
    """Leximax-minimal matching by enumerating every permutation."""
    if not isinstance(g, GlbopInstance):
        g = GlbopInstance(g)
    n = g.size
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force is limited to n <= {BRUTE_FORCE_LIMIT}, got {n}")
    best = None
    best_items = None
    for perm in permutations(range(n)):
        items = []
        ok = True
        for i in range(n):
            w = g.weight(i, perm[i])
            if w is FORBIDDEN:
                ok = False
                break
            items.extend(w.items)
        if not ok:
            continue
        key = tuple(sorted(items, reverse=True))
        if best is None or leximax_compare(key, best_items) == LESS:
            best = perm
            best_items = key
    if best is None:
        raise InfeasibleAssignment("no perfect matching avoids the forbidden edges")
    matching = _as_matching(np.asarray(best), g.n_rows, g.n_cols)
    return matching, _union(g, matching)
