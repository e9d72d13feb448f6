from itertools import permutations

import numpy as np
import pytest

from mmfctt import assignment
from mmfctt._backend import available_backends
from mmfctt.assignment import (
    FORBIDDEN,
    GlbopInstance,
    InfeasibleAssignment,
    brute_force_glbop,
    distinct_values,
    encode_vector,
    solve_glbop,
    solve_lbap,
    solve_lsap,
)
from mmfctt.fairness import WeightMultiset, leximax_compare

# e1-r1 {5}, e1-r2 {7}, e2-r1 {5,4}, e2-r2 {7,6}
FIG1 = [[[5], [7]], [[5, 4], [7, 6]]]


@pytest.fixture(params=sorted(available_backends()))
def backend(request, monkeypatch):
    module = available_backends()[request.param]
    monkeypatch.setattr(assignment, "core", module)
    return module


def random_glbop(rng, n, m=None, card=3, vmax=8, forbid=0.0):
    m = n if m is None else m
    rows = []
    for _ in range(n):
        row = []
        for _ in range(m):
            if forbid and rng.random() < forbid:
                row.append(FORBIDDEN)
            else:
                row.append(WeightMultiset(rng.integers(0, vmax + 1, rng.integers(0, card + 1))))
        rows.append(row)
    return GlbopInstance(rows)


class TestLsap:
    def test_identity(self, backend):
        c = np.full((4, 4), 50)
        np.fill_diagonal(c, 0)
        m, total = solve_lsap(c)
        assert m.sigma == (0, 1, 2, 3) and total == 0

    def test_all_equal(self, backend):
        m, total = solve_lsap(np.full((4, 4), 3))
        assert sorted(m.sigma) == [0, 1, 2, 3] and total == 12
        assert m.sigma == (0, 1, 2, 3)  # canonical: smallest permutation

    def test_brute_force(self, backend):
        rng = np.random.default_rng(1)
        for _ in range(40):
            c = rng.integers(0, 21, (5, 5))
            sums = {p: sum(c[i, p[i]] for i in range(5)) for p in permutations(range(5))}
            best = min(sums.values())
            m, total = solve_lsap(c)
            assert total == best
            assert m.sigma == min(p for p, v in sums.items() if v == best)

    def test_rectangular(self, backend):
        m, total = solve_lsap([[4, 1, 9], [2, 8, 0]])
        assert m.sigma == (1, 2) and total == 1
        m, total = solve_lsap([[4, 1], [2, 8], [0, 0]])
        assert total == 1 and m.sigma == (1, None, 0)

    def test_forbidden(self, backend):
        c = [[0, 5], [0, 5]]
        m, total = solve_lsap(c, allowed=[[0, 1], [1, 1]])
        assert m.sigma == (1, 0) and total == 5
        with pytest.raises(InfeasibleAssignment):
            solve_lsap(c, allowed=[[0, 1], [0, 1]])


class TestVectors:
    def test_fig1_values(self):
        g = GlbopInstance(FIG1)
        assert distinct_values(g) == [7, 6, 5, 4]

    def test_trivial_values(self):
        assert distinct_values(GlbopInstance([[[], []], [[], []]])) == []
        assert distinct_values(GlbopInstance([[[3]] * 2] * 2)) == [3]

    def test_encode(self):
        assert encode_vector([5, 4], [7, 6, 5, 4]) == (0, 0, 1, 1)
        assert encode_vector([], [7, 6, 5, 4]) == (0, 0, 0, 0)
        assert encode_vector([7, 7, 4], [7, 6, 5, 4]) == (2, 0, 0, 1)
        with pytest.raises(ValueError):
            encode_vector([3], [7, 6])

    def test_vector_order_matches_leximax(self):
        # equal-cardinality multisets: lexicographic order on multiplicity
        # vectors (largest value first) is the leximax order
        rng = np.random.default_rng(2)
        values = list(range(8, -1, -1))
        for _ in range(500):
            k = int(rng.integers(0, 6))
            a = sorted(rng.integers(0, 9, k), reverse=True)
            b = sorted(rng.integers(0, 9, k), reverse=True)
            va, vb = encode_vector(a, values), encode_vector(b, values)
            assert ((va > vb) - (va < vb)) == leximax_compare(tuple(a), tuple(b))

    def test_vector_arithmetic(self):
        from mmfctt.assignment import VectorCost
        a = VectorCost((1, 2))
        assert a + VectorCost((3, 4)) == (4, 6)
        assert a - VectorCost((1, 1)) == (0, 1)
        assert VectorCost.zero(3) == (0, 0, 0)


class TestGlbop:
    def test_fig1(self, backend):
        m, w = solve_glbop(GlbopInstance(FIG1))
        assert m.sigma == (1, 0)
        assert w.sorted() == (7, 5, 4)

    def test_fig1_lbap_projections(self, backend):
        m1, c1 = solve_lbap([[5, 7], [5, 7]])
        m2, c2 = solve_lbap([[5, 7], [4, 6]])
        assert c1 == (7, 5) and c2 == (6, 5)
        # neither projection's optimum is optimal for the combined problem
        g = GlbopInstance(FIG1)
        for m in (m1, m2):
            items = sorted((x for i, j in m.pairs() for x in g.weights[i][j]), reverse=True)
            assert leximax_compare(tuple(items), (7, 5, 4)) > 0

    def test_trivial(self, backend):
        m, w = solve_glbop(GlbopInstance([[[3], [3]], [[3], [3]]]))
        assert w.sorted() == (3, 3)
        m, w = solve_glbop(GlbopInstance([[[]]]))
        assert w.sorted() == ()
        assert brute_force_glbop(GlbopInstance([[[4, 1]]]))[1].sorted() == (4, 1)

    def test_brute_force_agreement(self, backend):
        rng = np.random.default_rng(3)
        for _ in range(200):
            n = int(rng.integers(1, 7))
            g = random_glbop(rng, n, card=3, vmax=6)
            m, w = solve_glbop(g)
            bm, bw = brute_force_glbop(g)
            assert w == bw
            assert m == bm  # canonical tie-breaking matches first-found minimum

    def test_rectangular_and_forbidden(self, backend):
        rng = np.random.default_rng(4)
        for _ in range(100):
            n = int(rng.integers(1, 5))
            m_cols = int(rng.integers(n, 6))
            g = random_glbop(rng, n, m_cols, forbid=0.3)
            try:
                bm, bw = brute_force_glbop(g)
            except InfeasibleAssignment:
                with pytest.raises(InfeasibleAssignment):
                    solve_glbop(g)
                continue
            m, w = solve_glbop(g)
            assert w == bw
            for i, j in m.pairs():
                assert g.weights[i][j] is not FORBIDDEN

    def test_lbap_agrees_with_glbop(self, backend):
        rng = np.random.default_rng(5)
        for _ in range(100):
            n = int(rng.integers(1, 6))
            c = rng.integers(0, 10, (n, n))
            _, cost = solve_lbap(c)
            best = min(tuple(sorted((c[i, p[i]] for i in range(n)), reverse=True))
                       for p in permutations(range(n)))
            assert cost == best

    def test_brute_force_limit(self):
        with pytest.raises(ValueError):
            brute_force_glbop(GlbopInstance([[[]] * 9] * 9))

    def test_backends_agree_on_large(self):
        backends = available_backends()
        if len(backends) < 2:
            pytest.skip("compiled backend not built")
        rng = np.random.default_rng(6)
        for _ in range(20):
            n = int(rng.integers(5, 25))
            cost = rng.integers(0, 4, (n, n, 6))
            a = backends["python"].solve_lvap(cost)
            b = backends["cython"].solve_lvap(cost)
            assert np.array_equal(a, b)
