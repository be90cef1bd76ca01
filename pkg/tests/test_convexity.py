import itertools
from fractions import Fraction

import numpy as np
import pytest

from noniid.correlations import Alphabet, Behavior
from noniid.convexity import (
    ConvexDecomposition,
    NotSeparable,
    SeparatingFunctional,
    is_extreme,
    membership,
    linearity_demo,
    separating_functional,
    solve_lp,
)
from noniid.devices import derive_rng
from noniid.hypothesis import FunctionTest, TabularTest
from noniid.triangle import SCENARIO, all_agree_point, shared_coin

BINARY = Alphabet(1, 2)


def binary(p0) -> Behavior:
    if isinstance(p0, Fraction):
        return Behavior(BINARY, np.array([[p0], [1 - p0]], dtype=object))
    return Behavior(BINARY, np.array([[p0], [1 - p0]]))


def random_behavior(rng, A, X) -> Behavior:
    return Behavior(Alphabet(X, A), rng.dirichlet(np.ones(A), size=X).T)


class TestSolveLP:
    def test_known_optimum(self):
        # min -x - y  s.t.  x + y + s = 1  ->  optimum -1 on the segment
        res = solve_lp([[1, 1, 1]], [1], [-1, -1, 0])
        assert res.status == "optimal"
        assert res.objective == pytest.approx(-1.0)
        assert res.x[0] + res.x[1] == pytest.approx(1.0)

    def test_infeasible_farkas(self):
        # x1 + x2 = 1 and x1 + x2 = 2 cannot both hold
        A = [[1, 1], [1, 1]]
        b = [1, 2]
        res = solve_lp(A, b, [0, 0])
        assert res.status == "infeasible"
        y = res.dual
        yb = sum(yi * bi for yi, bi in zip(y, b))
        assert yb > 1e-9
        for j in range(2):
            assert sum(y[i] * A[i][j] for i in range(2)) <= 1e-9

    def test_exact_mode(self):
        res = solve_lp([[1, 1, 1]], [1], [-1, -2, 0], exact=True)
        assert res.status == "optimal"
        assert res.objective == Fraction(-2)
        assert res.x[1] == Fraction(1)

    def test_unbounded(self):
        # min -x with only x - s = 0: x can grow forever
        res = solve_lp([[1, -1]], [0], [-1, 0])
        assert res.status == "unbounded"


class TestMembership:
    def test_midpoint(self):
        result = membership(binary(0.5), [binary(1.0), binary(0.0)])
        assert isinstance(result, ConvexDecomposition)
        assert tuple(float(w) for w in result.weights) == pytest.approx((0.5, 0.5))
        assert result.residual <= 1e-12

    def test_shared_coin_decomposition(self):
        # the clock's two constant points mix exactly to the shared coin
        result = membership(shared_coin(exact=True),
                            [all_agree_point(0, exact=True), all_agree_point(1, exact=True)])
        assert isinstance(result, ConvexDecomposition)
        assert result.weights == (Fraction(1, 2), Fraction(1, 2))
        assert result.residual == 0

    def test_not_member_certificate(self):
        # hand oracle: max-margin separator of (1,0) from {(0,1), (1/2,1/2)}
        # is c = (1,-1) with alpha = 0 and margin 1
        target, others = binary(1.0), [binary(0.0), binary(0.5)]
        result = membership(target, others)
        assert isinstance(result, SeparatingFunctional)
        assert result.margin > 0
        for Q in others:
            assert result.value(Q) <= result.alpha + 1e-9
        assert result.value(target) == pytest.approx(result.alpha + result.margin)

        sep = separating_functional(target, others)
        assert np.asarray(sep.coeffs, dtype=float)[:, 0] == pytest.approx((1.0, -1.0))
        assert float(sep.alpha) == pytest.approx(0.0)
        assert float(sep.margin) == pytest.approx(1.0)

    def test_complementarity_random_instances(self):
        # exactly one certificate kind, re-verified, on 100 random instances
        rng = derive_rng(100)
        members = not_members = 0
        for i in range(100):
            A = int(rng.integers(2, 5))
            X = int(rng.integers(1, 5))
            if A * X > 16:
                X = 16 // A
            k = int(rng.integers(1, 8))
            candidates = [random_behavior(rng, A, X) for _ in range(k)]
            if rng.random() < 0.5 and k >= 2:
                lams = rng.dirichlet(np.ones(k))
                target = Behavior(Alphabet(X, A), sum(l * c.probs for l, c in zip(lams, candidates)))
            else:
                target = random_behavior(rng, A, X)
            result = membership(target, candidates)
            if isinstance(result, ConvexDecomposition):
                members += 1
                assert result.residual <= 1e-9
                nnz = int((np.abs(target.as_float()) > 1e-12).sum())
                assert len(result.weights) <= nnz + 1
                assert sum(float(w) for w in result.weights) == pytest.approx(1.0, abs=1e-9)
                assert all(float(w) > 0 for w in result.weights)
            else:
                not_members += 1
                assert result.margin > 0
                for Q in candidates:
                    assert float(result.value(Q)) <= float(result.alpha) + 1e-9
        assert members > 10 and not_members > 10

    def test_complementarity_exact_mode(self):
        # rational pivots: certificates re-verify with zero tolerance
        rng = derive_rng(101)
        for i in range(10):
            k = int(rng.integers(2, 6))
            candidates = [binary(Fraction(int(rng.integers(0, 33)), 32)) for _ in range(k)]
            if i % 2 == 0:
                lams = [Fraction(int(v), 16) for v in rng.multinomial(16, np.ones(k) / k)]
                target = Behavior(BINARY, sum(l * c.probs for l, c in zip(lams, candidates)))
            else:
                target = binary(Fraction(int(rng.integers(0, 33)), 32))
            result = membership(target, candidates, exact=True)
            if isinstance(result, ConvexDecomposition):
                assert sum(result.weights) == 1
                mix = sum(w * c.probs for w, c in zip(result.weights, result.components))
                assert all(mix[a, 0] == target.probs[a, 0] for a in range(2))
            else:
                assert result.margin > 0
                for Q in candidates:
                    assert result.value(Q) <= result.alpha

    def test_caratheodory_prunes_fat_decompositions(self):
        # 10 candidates in a 2-cell space: at most nnz + 1 = 3 survive
        rng = derive_rng(7)
        candidates = [binary(float(p)) for p in rng.random(10)]
        lams = rng.dirichlet(np.ones(10))
        target = Behavior(BINARY, sum(l * c.probs for l, c in zip(lams, candidates)))
        result = membership(target, candidates)
        assert isinstance(result, ConvexDecomposition)
        assert len(result.weights) <= 3
        assert result.residual <= 1e-9

    def test_caratheodory_exact(self):
        candidates = [binary(Fraction(i, 10)) for i in range(8)]
        lams = [Fraction(1, 8)] * 8
        target = Behavior(BINARY, sum(l * c.probs for l, c in zip(lams, candidates)))
        result = membership(target, candidates)
        assert isinstance(result, ConvexDecomposition)
        assert len(result.weights) <= 3
        assert result.residual == 0
        mix = sum(w * c.probs for w, c in zip(result.weights, result.components))
        assert all(mix[a, 0] == target.probs[a, 0] for a in range(2))

    def test_empty_candidates(self):
        with pytest.raises(ValueError):
            membership(binary(0.5), [])


class TestSeparatingFunctional:
    def test_single_point(self):
        # P = (1,0) vs {(0,1)}: closed-form 1-D answer c = (1,-1), margin 2
        sep = separating_functional(binary(1.0), [binary(0.0)])
        assert np.asarray(sep.coeffs, dtype=float)[:, 0] == pytest.approx((1.0, -1.0))
        assert float(sep.margin) == pytest.approx(2.0)
        assert float(sep.alpha) == pytest.approx(-1.0)

    def test_vertex_vs_other_vertices(self):
        alph = Alphabet(1, 4)
        verts = [Behavior.deterministic(alph, a) for a in range(4)]
        sep = separating_functional(verts[0], verts[1:])
        assert float(sep.margin) > 0
        assert np.abs(np.asarray(sep.coeffs, dtype=float)).max() == pytest.approx(1.0)

    def test_midpoint_not_separable(self):
        with pytest.raises(NotSeparable):
            separating_functional(binary(0.5), [binary(0.0), binary(1.0)])

    def test_exact_mode(self):
        sep = separating_functional(binary(Fraction(1)), [binary(Fraction(0))], exact=True)
        assert sep.margin == Fraction(2)


class TestIsExtreme:
    def test_simplex_vertices(self):
        for A, X in ((2, 1), (4, 2), (8, 1), (3, 4)):
            alph = Alphabet(X, A)
            verts = [Behavior.deterministic(alph, [a] * X) for a in range(A)]
            flag, cert = is_extreme(verts[0], verts)
            assert flag
            assert isinstance(cert, SeparatingFunctional)

    def test_shared_coin_not_extreme(self):
        family = [all_agree_point(0, exact=True), all_agree_point(1, exact=True), shared_coin(exact=True)]
        flag, cert = is_extreme(shared_coin(exact=True), family)
        assert not flag
        assert isinstance(cert, ConvexDecomposition)
        assert cert.weights == (Fraction(1, 2), Fraction(1, 2))

    def test_barycenter_not_extreme(self):
        alph = Alphabet(1, 4)
        family = [Behavior.deterministic(alph, a) for a in range(4)] + [Behavior.uniform(alph)]
        flag, cert = is_extreme(Behavior.uniform(alph), family)
        assert not flag

    def test_requires_membership(self):
        with pytest.raises(ValueError):
            is_extreme(binary(0.3), [binary(0.5), binary(0.7)])

    def test_single_member_family(self):
        flag, cert = is_extreme(binary(0.3), [binary(0.3)])
        assert flag and cert is None


class TestLinearityDemo:
    def test_frequency_test_bounded_by_tuple_max(self):
        # accept iff the 2-round frequencies equal the shared coin
        def make_test(n):
            def decide(h):
                return 1.0 if sorted(h.outputs) == [0, 7] else 0.0
            return FunctionTest(n, SCENARIO.alphabet, decide)

        decomp = membership(shared_coin(), [all_agree_point(0), all_agree_point(1)])
        rows = linearity_demo(make_test, shared_coin(), decomp, n_max=2)
        last = rows[-1]
        assert last.acceptance_mixture == pytest.approx(0.5)   # transcripts (0,7) and (7,0)
        assert last.weighted_sum == pytest.approx(0.5)
        assert float(last.max_tuple_acceptance) == pytest.approx(1.0)
        assert last.bound_satisfied
        assert last.linearity_gap <= 1e-12

    def test_constant_decision(self):
        def make_test(n):
            return FunctionTest(n, BINARY, lambda h: 0.125)

        decomp = membership(binary(0.5), [binary(0.2), binary(0.8)])
        rows = linearity_demo(make_test, binary(0.5), decomp, n_max=3)
        for row in rows:
            assert row.acceptance_mixture == pytest.approx(0.125)
            assert float(row.max_tuple_acceptance) == pytest.approx(0.125)
            assert row.bound_satisfied

    def test_random_tables_linearity(self):
        rng = derive_rng(55)
        def make_test(n):
            table = {outs: float(rng.random()) for outs in itertools.product(range(2), repeat=n)}
            return TabularTest(n, BINARY, table)

        decomp = membership(binary(0.35), [binary(0.1), binary(0.9)])
        rows = linearity_demo(make_test, binary(0.35), decomp, n_max=3)
        for row in rows:
            assert row.linearity_gap <= 1e-12
            assert row.bound_satisfied

    def test_ksigma_test_against_clock_components(self):
        # the shared coin cannot beat the best ordering of the two clock points
        from noniid.hypothesis import ksigma_frequency_test
        from noniid.triangle import agreement_witness

        def make_test(n):
            return ksigma_frequency_test(agreement_witness(0.9), 0.9, 3.0, n=n)

        decomp = membership(shared_coin(), [all_agree_point(0), all_agree_point(1)])
        rows = linearity_demo(make_test, shared_coin(), decomp, n_max=2)
        for row in rows:
            assert row.linearity_gap <= 1e-12
            assert row.bound_satisfied
        # every all-agree transcript drives the agreement score to 1, so both
        # the mixture and the component products accept with certainty here
        assert rows[-1].acceptance_mixture == pytest.approx(1.0)
        assert float(rows[-1].max_tuple_acceptance) == pytest.approx(1.0)
