"""Clifford/exterior layer: products, the algebra morphism into End(Lambda V),
Berezin integral, spinor module and the rescaling weights."""

import random
from fractions import Fraction

import pytest

from getzler.algebra import Scalar
from getzler.clifford import (
    CliffordElement,
    EndoMatrix,
    FormElement,
    all_subsets,
    berezin,
    build_spinor_rep,
    clifford_map,
    contraction_matrix,
    getzler_conjugate,
    getzler_on_forms,
    supertrace,
    symbol_map,
    wedge_matrix,
    wedge_word_matrix,
)


def rand_clifford(rng, n, real=False):
    a = CliffordElement(n)
    for subset in all_subsets(n):
        if rng.random() < 0.4:
            c = Scalar(
                Fraction(rng.randint(-5, 5), rng.randint(1, 4)),
                0 if real else Fraction(rng.randint(-5, 5), rng.randint(1, 4)),
            )
            a = a + CliffordElement.word(n, subset, c)
    return a


class TestCliffordProduct:
    def test_generator_square(self):
        n = 2
        e1 = CliffordElement.generator(n, 1)
        assert e1 * e1 == CliffordElement.unit(n).scale(Scalar(-1))

    def test_disjoint_letters(self):
        n = 3
        e1 = CliffordElement.generator(n, 1)
        e2 = CliffordElement.generator(n, 2)
        assert e1 * e2 == CliffordElement.word(n, (1, 2))
        assert e2 * e1 == CliffordElement.word(n, (1, 2), Scalar(-1))

    def test_word_square(self):
        # (e1 e2)(e1 e2) = -e1 e1 e2 e2 = -(-1)(-1) = -1, by hand
        n = 2
        w = CliffordElement.word(n, (1, 2))
        assert w * w == CliffordElement.unit(n).scale(Scalar(-1))

    def test_canonicalizes_repeated_letter(self):
        # e1 e2 e1 = -(e1 e1) e2 = +e2 under the e.e = -1 convention
        n = 2
        e1 = CliffordElement.generator(n, 1)
        e2 = CliffordElement.generator(n, 2)
        assert e1 * e2 * e1 == e2

    def test_associative_randomized(self):
        rng = random.Random(12)
        for _ in range(60):
            a, b, c = (rand_clifford(rng, 3) for _ in range(3))
            assert (a * b) * c == a * (b * c)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            CliffordElement.generator(2, 1) * CliffordElement.generator(4, 1)


class TestCliffordMap:
    def test_action_on_unit(self):
        n = 2
        c1 = clifford_map(CliffordElement.generator(n, 1))
        assert c1.apply(FormElement.unit(n)) == FormElement.word(n, (1,))

    def test_contraction_part(self):
        n = 2
        c1 = clifford_map(CliffordElement.generator(n, 1))
        e1 = FormElement.word(n, (1,))
        assert c1.apply(e1) == FormElement(n, {(): Scalar(-1)})

    def test_word_on_unit(self):
        n = 3
        cw = clifford_map(CliffordElement.word(n, (1, 2)))
        assert cw.apply(FormElement.unit(n)) == FormElement.word(n, (1, 2))

    def test_square_is_minus_norm(self):
        # c(v)^2 . 1 = -|v|^2, which pins the sign convention
        n = 2
        v = CliffordElement.generator(n, 1) + CliffordElement.generator(n, 2).scale(Scalar(2))
        m = clifford_map(v)
        assert (m * m).apply(FormElement.unit(n)) == FormElement(n, {(): Scalar(-5)})

    def test_algebra_morphism_randomized(self):
        rng = random.Random(5)
        for _ in range(40):
            a = rand_clifford(rng, 3)
            b = rand_clifford(rng, 3)
            assert clifford_map(a * b) == clifford_map(a) * clifford_map(b)

    def test_injective_on_basis(self):
        n = 4
        for subset in all_subsets(n):
            assert not clifford_map(CliffordElement.word(n, subset)).is_zero()


class TestSymbolMap:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_words_to_wedges(self, n):
        for subset in all_subsets(n):
            assert symbol_map(CliffordElement.word(n, subset)) == FormElement.word(n, subset)

    def test_unit(self):
        assert symbol_map(CliffordElement.unit(2)) == FormElement.unit(2)

    def test_canonicalized_word(self):
        # e1 e2 e1 = +e2, so its symbol is +e^2
        n = 2
        a = (
            CliffordElement.generator(n, 1)
            * CliffordElement.generator(n, 2)
            * CliffordElement.generator(n, 1)
        )
        assert symbol_map(a) == FormElement.word(n, (2,))

    def test_linear_bijection(self):
        # symbol_map sends the 2^n basis words to the 2^n wedge words, hence
        # its matrix is a permutation of full rank
        n = 4
        images = set()
        for subset in all_subsets(n):
            img = symbol_map(CliffordElement.word(n, subset))
            assert list(img.coeffs) == [subset]
            images.add(subset)
        assert len(images) == 2 ** n


class TestBerezin:
    def test_top_form(self):
        n = 3
        top = FormElement.word(n, (1, 2, 3))
        assert berezin(top) == Scalar(1)

    def test_lower_degree_vanishes(self):
        n = 2
        assert berezin(FormElement.word(n, (1,))) == 0

    def test_linearity(self):
        n = 2
        omega = FormElement.word(n, (1, 2), Scalar(3)) + FormElement.word(n, (1,))
        assert berezin(omega) == Scalar(3)


class TestSpinorRep:
    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_clifford_relations(self, n):
        rep = build_spinor_rep(n)
        dim = rep.fock_dim
        ident = EndoMatrix.identity(dim)
        for i in range(1, n + 1):
            for j in range(i, n + 1):
                anti = rep.gamma[i] * rep.gamma[j] + rep.gamma[j] * rep.gamma[i]
                expected = ident.scale(Scalar(-2)) if i == j else EndoMatrix.zero(dim)
                assert anti == expected

    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_graded_dimensions(self, n):
        rep = build_spinor_rep(n)
        plus, minus = rep.plus_minus_dims()
        assert plus == minus == 2 ** (n // 2 - 1)

    def test_chirality_squares_to_identity(self):
        rep = build_spinor_rep(4)
        assert rep.chirality * rep.chirality == EndoMatrix.identity(rep.fock_dim)

    def test_representation_is_morphism(self):
        rng = random.Random(31)
        rep = build_spinor_rep(4)
        for _ in range(20):
            a = rand_clifford(rng, 4)
            b = rand_clifford(rng, 4)
            assert rep.represent(a * b) == rep.represent(a) * rep.represent(b)

    def test_odd_dimension_rejected(self):
        with pytest.raises(ValueError):
            build_spinor_rep(3)


class TestSupertrace:
    def test_unit_vanishes(self):
        rep = build_spinor_rep(2)
        assert supertrace(CliffordElement.unit(2), rep) == Scalar(0)

    def test_volume_word_n2(self):
        rep = build_spinor_rep(2)
        assert supertrace(CliffordElement.word(2, (1, 2)), rep) == Scalar(0, -2)

    def test_volume_word_n4(self):
        # str(e1 e2 e3 e4) = (-2i)^2 * T(s(e^{1234})) = -4; cross-checked
        # against the 4x4 representation matrices
        rep = build_spinor_rep(4)
        assert supertrace(CliffordElement.word(4, (1, 2, 3, 4)), rep) == Scalar(-4)

    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_berezin_identity_random(self, n):
        rng = random.Random(600 + n)
        rep = build_spinor_rep(n)
        factor = Scalar(0, -2) ** (n // 2)
        for _ in range(30):
            a = rand_clifford(rng, n)
            assert supertrace(a, rep) == factor * berezin(symbol_map(a))

    @pytest.mark.parametrize("n", [2, 4])
    def test_vanishes_on_odd_part(self, n):
        rng = random.Random(77)
        rep = build_spinor_rep(n)
        for _ in range(20):
            a = rand_clifford(rng, n).odd_part()
            assert supertrace(a, rep) == Scalar(0)


class TestRescalingMaps:
    def test_forms_scalar(self):
        g = getzler_on_forms(FormElement.unit(2))
        assert g.degrees() == [0]

    def test_forms_two_form(self):
        g = getzler_on_forms(FormElement.word(2, (1, 2)))
        assert g.degrees() == [-2]
        assert g.component(-2) == FormElement.word(2, (1, 2))

    def test_forms_mixed(self):
        omega = FormElement.unit(2) + FormElement.word(2, (1,))
        g = getzler_on_forms(omega)
        assert g.degrees() == [-1, 0]

    def test_conjugate_wedge_weight(self):
        g = getzler_conjugate(wedge_matrix(2, 1))
        assert g.degrees() == [-1]

    def test_conjugate_contraction_weight(self):
        g = getzler_conjugate(contraction_matrix(2, 1))
        assert g.degrees() == [1]

    def test_conjugate_multiplicative(self):
        rng = random.Random(9)
        n = 3
        for _ in range(40):
            a = clifford_map(rand_clifford(rng, n))
            b = clifford_map(rand_clifford(rng, n))
            assert getzler_conjugate(a * b) == getzler_conjugate(a) * getzler_conjugate(b)

    @pytest.mark.parametrize("n", [2, 4])
    def test_limit_lemma_words(self, n):
        # lambda^{|I|} U^sharp c(e^I): zero-degree part is exactly the wedge
        # word, everything else sits at strictly positive degree
        for subset in all_subsets(n):
            graded = getzler_conjugate(
                clifford_map(CliffordElement.word(n, subset))
            ).shift(len(subset))
            assert graded.min_degree() >= 0
            assert graded.component(0) == wedge_word_matrix(n, subset)
