"""Jet layer: printed expansion coefficients, cross-validation between the
metric/vielbein routes, connection symbols, Gilkey order and theta weights."""

import random
from fractions import Fraction

import pytest

from getzler.algebra import (
    PolyExpr,
    Scalar,
    canonicalize_curvature,
    random_curvature,
    valuation,
)
from getzler.jets import (
    GeometricPolynomial,
    JetContext,
    VielbeinFactor,
    pullback_flambda,
    theta_functional,
    valuation_limit,
)

R1212 = ("R", (1, 2, 1, 2), ())


def poly_from_linear(n, coeff_fn):
    """Build sum_l coeff_fn(l) x^l from exact rational coefficients."""
    out = PolyExpr.zero(n)
    for l in range(1, n + 1):
        out = out + PolyExpr.coordinate(n, l) * Scalar(coeff_fn(l))
    return out


class TestMetricExpansion:
    def test_printed_quadratic_coefficient(self):
        ctx = JetContext(2)
        g12 = ctx.metric.g[0][1]
        assert g12.coefficient((1, 1), (R1212,)) == Scalar(Fraction(-1, 3))

    def test_inverse_quadratic_coefficient(self):
        ctx = JetContext(2)
        ginv12 = ctx.metric.g_inv[0][1]
        assert ginv12.coefficient((1, 1), (R1212,)) == Scalar(Fraction(1, 3))

    def test_inverse_cubic_coefficient_sign(self):
        # the nabla-R cubic terms flip sign in the inverse, like the quadratic
        ctx = JetContext(2)
        key = ("R", (1, 2, 1, 2), (1,))
        g12 = ctx.metric.g[0][1]
        ginv12 = ctx.metric.g_inv[0][1]
        c = g12.coefficient((2, 1), (key,))
        assert not c.is_zero()
        assert ginv12.coefficient((2, 1), (key,)) == -c

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_inverse_is_inverse(self, n):
        ctx = JetContext(n)
        g, ginv = ctx.metric.g, ctx.metric.g_inv
        for i in range(n):
            for j in range(n):
                acc = PolyExpr.zero(n)
                for k in range(n):
                    acc = acc + g[i][k] * ginv[k][j]
                assert acc.eq_mod(PolyExpr.constant(n, 1 if i == j else 0))

    def test_flat_metric_is_identity(self):
        ctx = JetContext(3, curvature="flat")
        for i in range(3):
            for j in range(3):
                expected = PolyExpr.constant(3, 1 if i == j else 0)
                assert ctx.metric.g[i][j].eq_mod(expected)

    def test_symmetry(self):
        ctx = JetContext(3)
        for i in range(3):
            for j in range(3):
                assert ctx.metric.g[i][j] == ctx.metric.g[j][i]

    def test_truncation_rejected(self):
        with pytest.raises(ValueError):
            JetContext(2, K=4)

    def test_jg_regression(self):
        # j_g = 1 - (1/6) Ric_kl x^k x^l + O(|x|^3), Ric from the metric trace;
        # derived independently from the determinant expansion
        n = 3
        ctx = JetContext(n)
        jg = ctx.metric.j_g
        expected = PolyExpr.constant(n, 1)
        for i in range(1, n + 1):
            for k in range(1, n + 1):
                for l in range(1, n + 1):
                    expected = expected - (
                        ctx.curv((i, k, l, i)) * ctx.x(k) * ctx.x(l) * Fraction(1, 6)
                    )
        assert jg.eq_mod(expected, through=2)
        assert (jg * jg).eq_mod(_det(ctx))


def _det(ctx):
    from getzler.jets import _det_jet

    return _det_jet(ctx.metric.g, ctx.n, ctx.K)


class TestVielbein:
    def test_printed_coefficients(self):
        ctx = JetContext(2)
        a12 = ctx.vielbein.a[0][1]  # a_1^2
        assert a12.coefficient((1, 1), (R1212,)) == Scalar(Fraction(-1, 6))
        b21 = ctx.vielbein.b[1][0]  # b_2^1
        assert b21.coefficient((1, 1), (R1212,)) == Scalar(Fraction(1, 6))

    def test_cubic_coefficient(self):
        ctx = JetContext(2)
        a12 = ctx.vielbein.a[0][1]
        key = ("R", (1, 2, 1, 2), (1,))
        # -(1/12) nabla_t R_{ijkl} x^j x^k x^t: only (j,k,t)=(2,1,1) survives
        # canonicalization on the x1^2 x2 monomial
        assert a12.coefficient((2, 1), (key,)) == Scalar(Fraction(-1, 12))

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_a_at_squares_to_metric(self, n):
        ctx = JetContext(n)
        a = ctx.vielbein.a
        for i in range(n):
            for j in range(n):
                acc = PolyExpr.zero(n)
                for l in range(n):
                    acc = acc + a[i][l] * a[j][l]
                assert acc.eq_mod(ctx.metric.g[i][j])

    @pytest.mark.parametrize("n", [2, 3])
    def test_bt_b_is_inverse_metric(self, n):
        ctx = JetContext(n)
        b = ctx.vielbein.b
        for i in range(n):
            for j in range(n):
                acc = PolyExpr.zero(n)
                for l in range(n):
                    acc = acc + b[l][i] * b[l][j]
                assert acc.eq_mod(ctx.metric.g_inv[i][j])

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_a_b_is_identity(self, n):
        ctx = JetContext(n)
        a, b = ctx.vielbein.a, ctx.vielbein.b
        for i in range(n):
            for j in range(n):
                acc = PolyExpr.zero(n)
                for l in range(n):
                    acc = acc + a[i][l] * b[l][j]
                assert acc.eq_mod(PolyExpr.constant(n, 1 if i == j else 0))

    def test_valuation_of_offdiagonal(self):
        ctx = JetContext(2)
        assert valuation(ctx.vielbein.a[0][1]).value == 2
        delta = ctx.vielbein.a[0][0] - PolyExpr.constant(2, 1)
        assert valuation(delta).value == 2


class TestChristoffel:
    @pytest.mark.parametrize("n", [2, 3])
    def test_printed_leading_term_symbolic(self, n):
        # linear part of Gamma_ij^k equals (1/3)(R_{iklj} + R_{ilkj}) x^l;
        # this follows from the monoterm symmetries alone
        ctx = JetContext(n)
        gam = ctx.christoffel_jets
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                for k in range(1, n + 1):
                    expected = PolyExpr.zero(n)
                    for l in range(1, n + 1):
                        expected = expected + (
                            (ctx.curv((i, k, l, j)) + ctx.curv((i, l, k, j)))
                            * ctx.x(l) * Fraction(1, 3)
                        )
                    lin = gam[i - 1][j - 1][k - 1].degree_component(1)
                    assert lin == expected

    def test_printed_leading_term_numeric_bianchi(self):
        # same regression after instantiating an exact Bianchi-compliant tensor
        n = 4
        tensor = random_curvature(n, seed=17)
        ctx = JetContext(n, curvature="numeric", tensor=tensor)
        gam = ctx.christoffel_jets
        for i, j, k in [(1, 2, 3), (2, 2, 1), (1, 1, 1), (3, 4, 2)]:
            lin = gam[i - 1][j - 1][k - 1].degree_component(1)
            expected = poly_from_linear(
                n,
                lambda l: Fraction(1, 3)
                * (_t(tensor, (i, k, l, j)) + _t(tensor, (i, l, k, j))),
            )
            assert lin == expected

    def test_flat_vanishes(self):
        ctx = JetContext(2, curvature="flat")
        for plane in ctx.christoffel_jets:
            for row in plane:
                for entry in row:
                    assert entry.is_zero()

    def test_valuation_one(self):
        ctx = JetContext(2)
        assert valuation(ctx.christoffel_jets[0][0][1]).value == 1


def _t(tensor, idx):
    return tensor[idx]


class TestFrameConnection:
    def test_antisymmetry_symbolic(self):
        # metric compatibility of the parallel frame, exact within truncation
        n = 3
        ctx = JetContext(n)
        om = ctx.spin_connection_jets
        for i in range(n):
            for s in range(n):
                for t in range(n):
                    assert (om[i][s][t] + om[i][t][s]).eq_mod(PolyExpr.zero(n))

    @pytest.mark.parametrize("n", [2, 4])
    def test_leading_term_numeric_bianchi(self, n):
        # omega_{ist} = -(1/2) R_{ilst} x^l + O(|x|^2): needs first Bianchi,
        # so instantiate exact random curvature
        tensor = random_curvature(n, seed=23)
        ctx = JetContext(n, curvature="numeric", tensor=tensor)
        om = ctx.spin_connection_jets
        for i in range(1, n + 1):
            for s in range(1, n + 1):
                for t in range(1, n + 1):
                    lin = om[i - 1][s - 1][t - 1].degree_component(1)
                    expected = poly_from_linear(
                        n, lambda l: Fraction(-1, 2) * _t(tensor, (i, l, s, t))
                    )
                    assert lin == expected

    def test_frame_direction_leading_term(self):
        n = 2
        tensor = random_curvature(n, seed=29)
        ctx = JetContext(n, curvature="numeric", tensor=tensor)
        tilde = ctx.christoffel_frame_jets
        for l in range(1, n + 1):
            for s in range(1, n + 1):
                for t in range(1, n + 1):
                    lin = tilde[l - 1][s - 1][t - 1].degree_component(1)
                    expected = poly_from_linear(
                        n, lambda m: Fraction(-1, 2) * _t(tensor, (l, m, s, t))
                    )
                    assert lin == expected

    def test_gilkey_order_one(self):
        ctx = JetContext(2)
        assert ctx.geo_christoffel_frame(1, 1, 2).gilkey_order() == 1
        assert ctx.geo_spin_connection(1, 1, 2).gilkey_order() == 1

    def test_scaling_law(self):
        # the frame symbols for the dilated metric are the lambda-shifted
        # pullbacks, which in graded form is the Gilkey-order-1 bookkeeping
        ctx = JetContext(2)
        pb = pullback_flambda(ctx.geo_christoffel_frame(1, 1, 2))
        assert pb.gilkey_order == 1
        assert pb.for_scaled_metric == pb.pullback.shift(1)

    def test_frame_curvature_constant_term(self):
        n = 4
        tensor = random_curvature(n, seed=41)
        ctx = JetContext(n, curvature="numeric", tensor=tensor)
        for idx in [(1, 2, 3, 4), (1, 3, 2, 4), (1, 2, 1, 2), (2, 4, 1, 3)]:
            i, j, s, t = idx
            got = ctx.frame_curvature(i, j, s, t).constant_term()
            assert got == PolyExpr.constant(n, Scalar(_t(tensor, idx)))

    def test_scalar_curvature_constant_term(self):
        n = 2
        tensor = random_curvature(n, seed=43)
        ctx = JetContext(n, curvature="numeric", tensor=tensor)
        expected = sum(
            _t(tensor, (i, j, j, i))
            for i in range(1, n + 1)
            for j in range(1, n + 1)
        )
        got = ctx.geo_scal().jet().constant_term()
        assert got == PolyExpr.constant(n, Scalar(expected))
        assert ctx.geo_scal().gilkey_order() == 2


class TestGeometricPolynomials:
    def test_metric_diagonal_theta_zero(self):
        ctx = JetContext(2)
        value, exact = theta_functional(ctx, ctx.geo_metric(1, 1))
        assert value == 0 and exact

    def test_metric_offdiagonal_theta_two(self):
        ctx = JetContext(2)
        value, exact = theta_functional(ctx, ctx.geo_metric(1, 2))
        assert exact and value >= 2

    def test_frame_christoffel_theta_distinct_indices(self):
        ctx = JetContext(3)
        value, exact = theta_functional(ctx, ctx.geo_christoffel_frame(1, 2, 3))
        assert exact and value >= 2

    def test_frame_christoffel_theta_decomposition_artifact(self):
        # With the canonical fully-expanded decomposition, components whose
        # direction index repeats a frame index contain a monomial in which
        # the single derivative lands on a diagonal vielbein entry, giving
        # weight 1 instead of the coarser-decomposition value 2.  The graded
        # weight of the expanded jet is still 2; this is the documented
        # decomposition dependence of theta.
        ctx = JetContext(2)
        value, exact = theta_functional(ctx, ctx.geo_christoffel_frame(1, 1, 2))
        assert exact and value == 1
        jet = ctx.geo_christoffel_frame(1, 1, 2).jet()
        from getzler.algebra import valuation as val

        assert ctx.geo_christoffel_frame(1, 1, 2).gilkey_order() + val(jet).value == 2

    def test_gilkey_additive_on_products(self):
        ctx = JetContext(2)
        rng = random.Random(4)
        pool = [
            ctx.geo_a(1, 1),
            ctx.geo_b(2, 1).derivative(1),
            ctx.geo_metric(1, 2),
            ctx.geo_christoffel(1, 2, 1),
            ctx.geo_spin_connection(2, 1, 2),
        ]
        for _ in range(40):
            p = rng.choice(pool)
            q = rng.choice(pool)
            if p.gilkey_order() is None or q.gilkey_order() is None:
                continue
            prod = p * q
            if prod.gilkey_order() is None:
                continue
            assert prod.gilkey_order() == p.gilkey_order() + q.gilkey_order()

    def test_gilkey_invariant_under_pullback(self):
        ctx = JetContext(2)
        poly = ctx.geo_christoffel(1, 2, 1)
        assert pullback_flambda(poly).gilkey_order == poly.gilkey_order()

    def test_mixed_gilkey_rejected(self):
        ctx = JetContext(2)
        with pytest.raises(ValueError):
            ctx.geo_a(1, 1) + ctx.geo_a(1, 1).derivative(1)

    def test_geo_jets_match_direct_jets(self):
        ctx = JetContext(2)
        for i in range(1, 3):
            for j in range(1, 3):
                assert ctx.geo_metric(i, j).jet().eq_mod(ctx.metric.g[i - 1][j - 1])
                assert ctx.geo_metric_inv(i, j).jet().eq_mod(
                    ctx.metric.g_inv[i - 1][j - 1]
                )
        for i in range(1, 3):
            for j in range(1, 3):
                for k in range(1, 3):
                    assert ctx.geo_christoffel(i, j, k).jet().eq_mod(
                        ctx.christoffel_jets[i - 1][j - 1][k - 1]
                    )


class TestPullback:
    def test_metric_identity(self):
        # (g_lambda)_ij(x) = g_ij(f_lambda x): Gilkey order zero
        ctx = JetContext(2)
        pb = pullback_flambda(ctx.geo_metric(1, 2))
        assert pb.gilkey_order == 0
        assert pb.for_scaled_metric == pb.pullback

    def test_christoffel_identity(self):
        ctx = JetContext(2)
        pb = pullback_flambda(ctx.geo_christoffel(1, 2, 1))
        assert pb.gilkey_order == 1
        assert pb.for_scaled_metric == pb.pullback.shift(1)

    def test_constant_unchanged(self):
        ctx = JetContext(2)
        pb = pullback_flambda(ctx.geo_const(5))
        assert pb.for_scaled_metric.degrees() == [0]


class TestValuationLimit:
    def test_low_theta_converges_to_zero(self):
        n = 2
        h = PolyExpr.coordinate(n, 1) * PolyExpr.coordinate(n, 2)
        verdict = valuation_limit(h, (1,), 1)
        assert verdict.kind == "zero"
        assert verdict.value.is_zero()

    def test_critical_theta_gives_taylor_coefficient(self):
        n = 2
        h = PolyExpr.coordinate(n, 1) * PolyExpr.coordinate(n, 2)
        verdict = valuation_limit(h, (1,), 2)
        assert verdict.kind == "finite"
        assert verdict.value == PolyExpr.coordinate(n, 2)

    def test_diverges(self):
        n = 2
        verdict = valuation_limit(PolyExpr.coordinate(n, 1), (), 2)
        assert verdict.kind == "diverges"

    def test_strict_inequality_zero(self):
        n = 2
        verdict = valuation_limit(PolyExpr.coordinate(n, 1), (), 0)
        assert verdict.kind == "zero"

    def test_truncation_indeterminate(self):
        n = 2
        h = PolyExpr.zero(n, trunc=3)
        verdict = valuation_limit(h, (), 5)
        assert verdict.kind == "indeterminate"
