"""Exact arithmetic layer: scalars, curvature canonicalization, polynomials,
valuations and the formal rescaling grading."""

import random
from fractions import Fraction

import pytest

from getzler.algebra import (
    LambdaGraded,
    PolyExpr,
    Scalar,
    Valuation,
    bianchi_cyclic_sum,
    canonicalize_curvature,
    curvature_projection,
    lambda_substitute,
    random_curvature,
    valuation,
)


def rand_scalar(rng):
    return Scalar(
        Fraction(rng.randint(-6, 6), rng.randint(1, 5)),
        Fraction(rng.randint(-6, 6), rng.randint(1, 5)),
    )


def rand_poly(rng, n=2, max_terms=4, curv=True):
    p = PolyExpr.zero(n)
    for _ in range(rng.randint(0, max_terms)):
        deg = tuple(rng.randint(0, 2) for _ in range(n))
        keys = ()
        if curv and rng.random() < 0.5:
            idx = tuple(rng.randint(1, n) for _ in range(4))
            sign, key = canonicalize_curvature(idx)
            if sign == 0:
                continue
            keys = (key,)
        p = p + PolyExpr(n, {(deg, keys): rand_scalar(rng)})
    return p


class TestScalar:
    def test_exactness(self):
        a = Scalar(Fraction(1, 3)) + Scalar(Fraction(1, 6))
        assert a == Scalar(Fraction(1, 2))

    def test_complex_arithmetic(self):
        i = Scalar.i()
        assert i * i == Scalar(-1)
        assert (Scalar(-2) * i) ** 2 == Scalar(-4)
        # the supertrace normalization constants (-2i)^{n/2}
        assert (Scalar(0, -2)) ** 1 == Scalar(0, -2)
        assert (Scalar(0, -2)) ** 2 == Scalar(-4)
        assert (Scalar(0, -2)) ** 3 == Scalar(0, 8)

    def test_inverse(self):
        z = Scalar(Fraction(3, 4), Fraction(-2, 5))
        assert z * z.inverse() == Scalar(1)
        with pytest.raises(ZeroDivisionError):
            Scalar(0).inverse()


class TestCanonicalize:
    def test_antisymmetry_first_pair(self):
        assert canonicalize_curvature((2, 1, 3, 4)) == (-1, ("R", (1, 2, 3, 4), ()))

    def test_repeated_index_vanishes(self):
        sign, key = canonicalize_curvature((1, 1, 3, 4))
        assert sign == 0 and key is None
        sign, key = canonicalize_curvature((1, 2, 4, 4))
        assert sign == 0 and key is None

    def test_pair_symmetry(self):
        assert canonicalize_curvature((3, 4, 1, 2)) == (1, ("R", (1, 2, 3, 4), ()))

    def test_idempotent_and_sign_consistent(self):
        rng = random.Random(7)
        for _ in range(300):
            idx = tuple(rng.randint(1, 4) for _ in range(4))
            sign, key = canonicalize_curvature(idx)
            if sign == 0:
                continue
            sign2, key2 = canonicalize_curvature(key[1])
            assert sign2 == 1 and key2 == key

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            canonicalize_curvature((0, 1, 2, 3))


class TestPolyRing:
    def test_ring_axioms_randomized(self):
        rng = random.Random(2024)
        for _ in range(1000):
            a, b, c = (rand_poly(rng) for _ in range(3))
            assert (a + b) + c == a + (b + c)
            assert a + b == b + a
            assert (a * b) * c == a * (b * c)
            assert a * b == b * a
            assert a * (b + c) == a * b + a * c

    def test_units(self):
        n = 3
        one = PolyExpr.constant(n, 1)
        zero = PolyExpr.zero(n)
        x2 = PolyExpr.coordinate(n, 2)
        assert x2 * one == x2
        assert x2 + zero == x2
        assert x2 * zero == zero

    def test_curvature_canonical_in_poly(self):
        p = PolyExpr.curvature(4, (2, 1, 3, 4))
        q = PolyExpr.curvature(4, (1, 2, 3, 4))
        assert p == q * Scalar(-1)
        assert PolyExpr.curvature(4, (1, 1, 3, 4)).is_zero()

    def test_derivative(self):
        n = 2
        x1 = PolyExpr.coordinate(n, 1)
        x2 = PolyExpr.coordinate(n, 2)
        p = x1 * x1 * x2
        assert p.derivative(1) == x1 * x2 * 2
        assert p.derivative(2) == x1 * x1

    def test_truncation_propagates(self):
        n = 2
        x1 = PolyExpr.coordinate(n, 1)
        jet = (PolyExpr.constant(n, 1) + x1 * x1).truncated(3)
        assert jet.trunc == 3
        assert (jet * jet).trunc == 3
        assert jet.derivative(1).trunc == 2
        # multiplying by a high-valuation exact factor keeps more degrees
        assert (jet * (x1 * x1)).trunc == 5

    def test_eq_mod(self):
        n = 2
        x1 = PolyExpr.coordinate(n, 1)
        jet = PolyExpr.constant(n, 1).truncated(2)
        other = (PolyExpr.constant(n, 1) + x1 * x1 * x1).truncated(3)
        assert jet.eq_mod(other)  # differ only above the common truncation


class TestValuation:
    def test_plain(self):
        n = 2
        x1 = PolyExpr.coordinate(n, 1)
        assert valuation(x1 * x1).value == 2
        assert valuation(PolyExpr.constant(n, 5)).value == 0

    def test_truncation_limited(self):
        v = valuation(PolyExpr.zero(2, trunc=3))
        assert not v.is_finite
        assert v.truncation_limited
        assert v.lower_bound == 4

    def test_exact_zero(self):
        v = valuation(PolyExpr.zero(2))
        assert not v.is_finite and not v.truncation_limited


class TestLambdaGrading:
    def test_constant(self):
        p = PolyExpr.constant(2, 1)
        g = lambda_substitute(p, 0)
        assert g.degrees() == [0]
        assert g.component(0) == p

    def test_shifted_degree(self):
        n = 2
        p = PolyExpr.coordinate(n, 1) * PolyExpr.coordinate(n, 2)
        g = lambda_substitute(p, -1)
        assert g.degrees() == [1]
        assert g.component(1) == p

    def test_metric_style_split(self):
        # delta-term at degree 0, quadratic curvature term at degree 2
        n = 2
        x1 = PolyExpr.coordinate(n, 1)
        x2 = PolyExpr.coordinate(n, 2)
        quad = PolyExpr.curvature(n, (1, 2, 1, 2), coeff=Fraction(-1, 3)) * x1 * x2
        p = PolyExpr.constant(n, 1) + quad
        g = lambda_substitute(p, 0)
        assert g.degrees() == [0, 2]
        assert g.component(0) == PolyExpr.constant(n, 1)
        assert g.component(2) == quad

    def test_multiplicative(self):
        rng = random.Random(99)
        for _ in range(200):
            a = rand_poly(rng)
            b = rand_poly(rng)
            w1, w2 = rng.randint(-2, 2), rng.randint(-2, 2)
            lhs = lambda_substitute(a * b, w1 + w2)
            rhs = lambda_substitute(a, w1) * lambda_substitute(b, w2)
            assert lhs == rhs


class TestRandomCurvature:
    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_symmetries_exact(self, n):
        t = random_curvature(n, seed=5)
        rng = range(1, n + 1)
        for i in rng:
            for j in rng:
                for k in rng:
                    for l in rng:
                        assert t[(i, j, k, l)] == -t[(j, i, k, l)]
                        assert t[(i, j, k, l)] == -t[(i, j, l, k)]
                        assert t[(i, j, k, l)] == t[(k, l, i, j)]
                        assert bianchi_cyclic_sum(t, (i, j, k, l)) == 0

    def test_projection_idempotent(self):
        n = 4
        t = random_curvature(n, seed=11)
        again = curvature_projection(t, n)
        assert again == t

    def test_dimension_two_single_component(self):
        t = random_curvature(2, seed=3)
        # every nonzero entry is +-R_1212
        r = t[(1, 2, 1, 2)]
        assert r != 0
        assert t[(2, 1, 2, 1)] == r
        assert t[(2, 1, 1, 2)] == -r
        nonzero = {idx for idx, v in t.items() if v != 0}
        assert nonzero == {(1, 2, 1, 2), (2, 1, 2, 1), (1, 2, 2, 1), (2, 1, 1, 2)}

    def test_odd_dimension_rejected(self):
        with pytest.raises(ValueError):
            random_curvature(3, seed=0)

    def test_bianchi_direct_cyclic_evaluation(self):
        # independent oracle: evaluate the cyclic sum definition directly at n=4
        t = random_curvature(4, seed=21)
        for idx in [(1, 2, 3, 4), (1, 3, 2, 4), (2, 3, 1, 4)]:
            i, j, k, l = idx
            assert t[(i, j, k, l)] + t[(i, k, l, j)] + t[(i, l, j, k)] == 0
