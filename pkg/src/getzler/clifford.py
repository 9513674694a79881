"""Exterior algebra, Clifford algebra, spinor representation and the
degree-weighted rescaling maps on forms and endomorphisms.

Basis bookkeeping: subsets of ``{1..n}`` are stored as strictly increasing
tuples and ordered by ``(size, lexicographic)`` everywhere.  The Clifford
convention is ``e^i . e^i = -1``, pinned by requiring that the action
``c(v) = v^ - v-contraction`` squares to ``-|v|^2`` on scalars.
"""

from __future__ import annotations

from itertools import combinations

from .algebra import ONE, PolyExpr, Scalar, LambdaGraded

__all__ = [
    "FormElement",
    "CliffordElement",
    "EndoMatrix",
    "SpinorRep",
    "all_subsets",
    "wedge_word",
    "clifford_word_product",
    "clifford_map",
    "symbol_map",
    "berezin",
    "build_spinor_rep",
    "supertrace",
    "getzler_on_forms",
    "getzler_conjugate",
]


def all_subsets(n: int):
    """All index subsets of {1..n} in the canonical (size, lex) order."""
    out = []
    for k in range(n + 1):
        out.extend(combinations(range(1, n + 1), k))
    return out


def _is_zero(c) -> bool:
    probe = getattr(c, "is_zero", None)
    if probe is not None:
        return probe()
    return c == 0


def wedge_word(a: tuple, b: tuple):
    """Sign and subset of ``e^a ^ e^b`` for increasing tuples; zero on overlap."""
    if set(a) & set(b):
        return 0, None
    merged = []
    sign = 1
    ai, bi = 0, 0
    # count transpositions while merging
    while ai < len(a) and bi < len(b):
        if a[ai] < b[bi]:
            merged.append(a[ai])
            ai += 1
        else:
            merged.append(b[bi])
            if (len(a) - ai) % 2:
                sign = -sign
            bi += 1
    merged.extend(a[ai:])
    merged.extend(b[bi:])
    return sign, tuple(merged)


def clifford_word_product(a: tuple, b: tuple):
    """Sign and subset of the Clifford product of two increasing words."""
    word = list(a)
    sign = 1
    for letter in b:
        crossings = sum(1 for x in word if x > letter)
        if crossings % 2:
            sign = -sign
        if letter in word:
            word.remove(letter)
            sign = -sign  # e^i . e^i = -1
        else:
            word.append(letter)
            word.sort()
    return sign, tuple(word)


class _GradedCoeffs:
    """Shared storage and linear structure for forms and Clifford elements."""

    __slots__ = ("n", "coeffs")

    def __init__(self, n: int, coeffs=None):
        self.n = n
        self.coeffs = {}
        if coeffs:
            for subset, c in coeffs.items():
                if not _is_zero(c):
                    self.coeffs[tuple(subset)] = c

    def _add_term(self, coeffs, subset, c):
        cur = coeffs.get(subset)
        c = c if cur is None else cur + c
        if _is_zero(c):
            coeffs.pop(subset, None)
        else:
            coeffs[subset] = c

    def __add__(self, other):
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        coeffs = dict(self.coeffs)
        out = type(self)(self.n)
        for subset, c in other.coeffs.items():
            self._add_term(coeffs, subset, c)
        out.coeffs = {k: v for k, v in coeffs.items() if not _is_zero(v)}
        return out

    def __neg__(self):
        return type(self)(self.n, {k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s):
        return type(self)(self.n, {k: v * s for k, v in self.coeffs.items()})

    def coefficient(self, subset):
        return self.coeffs.get(tuple(subset), 0)

    def is_zero(self) -> bool:
        return not self.coeffs

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.n == other.n and _coeffs_equal(self.coeffs, other.coeffs)

    def __repr__(self):
        if not self.coeffs:
            return f"{type(self).__name__}(0)"
        parts = []
        for subset in sorted(self.coeffs, key=lambda s: (len(s), s)):
            parts.append(f"{self.coeffs[subset]}*{''.join(map(str, subset)) or '1'}")
        return f"{type(self).__name__}({' + '.join(parts)})"


def _coeffs_equal(a, b):
    keys = set(a) | set(b)
    for k in keys:
        ca, cb = a.get(k), b.get(k)
        if ca is None:
            if not _is_zero(cb):
                return False
        elif cb is None:
            if not _is_zero(ca):
                return False
        elif not _is_zero(ca - cb):
            return False
    return True


class FormElement(_GradedCoeffs):
    """Element of the exterior algebra on n generators."""

    def wedge(self, other: "FormElement") -> "FormElement":
        out = {}
        for sa, ca in self.coeffs.items():
            for sb, cb in other.coeffs.items():
                sign, merged = wedge_word(sa, sb)
                if sign == 0:
                    continue
                self._add_term(out, merged, ca * cb * sign)
        return FormElement(self.n, out)

    def degree_part(self, k: int) -> "FormElement":
        return FormElement(
            self.n, {s: c for s, c in self.coeffs.items() if len(s) == k}
        )

    def top_coefficient(self):
        """Coefficient of e^1 ^ ... ^ e^n (the Berezin integral of this form)."""
        return self.coeffs.get(tuple(range(1, self.n + 1)), 0)

    @staticmethod
    def unit(n: int) -> "FormElement":
        return FormElement(n, {(): ONE})

    @staticmethod
    def word(n: int, subset, coeff=1) -> "FormElement":
        return FormElement(n, {tuple(subset): Scalar.of(coeff) if isinstance(coeff, (int,)) else coeff})


class CliffordElement(_GradedCoeffs):
    """Element of the complex Clifford algebra with e^i . e^i = -1."""

    def __mul__(self, other):
        if not isinstance(other, CliffordElement):
            return self.scale(other)
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        out = {}
        for sa, ca in self.coeffs.items():
            for sb, cb in other.coeffs.items():
                sign, word = clifford_word_product(sa, sb)
                self._add_term(out, word, ca * cb * sign)
        return CliffordElement(self.n, out)

    __rmul__ = lambda self, other: self.scale(other)

    def even_part(self) -> "CliffordElement":
        return CliffordElement(
            self.n, {s: c for s, c in self.coeffs.items() if len(s) % 2 == 0}
        )

    def odd_part(self) -> "CliffordElement":
        return CliffordElement(
            self.n, {s: c for s, c in self.coeffs.items() if len(s) % 2 == 1}
        )

    @staticmethod
    def unit(n: int) -> "CliffordElement":
        return CliffordElement(n, {(): ONE})

    @staticmethod
    def word(n: int, subset, coeff=1) -> "CliffordElement":
        c = coeff if not isinstance(coeff, int) else Scalar.of(coeff)
        return CliffordElement(n, {tuple(subset): c})

    @staticmethod
    def generator(n: int, i: int) -> "CliffordElement":
        return CliffordElement.word(n, (i,))


def clifford_multiply(a: CliffordElement, b: CliffordElement) -> CliffordElement:
    return a * b


class EndoMatrix:
    """Sparse square matrix over the subset basis of an exterior algebra.

    Rows and columns are subsets of {1..dim} ordered by (size, lex).  Entries
    live in any commutative coefficient ring (Scalar, PolyExpr, ...).
    """

    __slots__ = ("dim", "entries")

    def __init__(self, dim: int, entries=None):
        self.dim = dim
        self.entries = {}
        if entries:
            for (row, col), c in entries.items():
                if not _is_zero(c):
                    self.entries[(tuple(row), tuple(col))] = c

    @staticmethod
    def identity(dim: int) -> "EndoMatrix":
        return EndoMatrix(dim, {(s, s): ONE for s in all_subsets(dim)})

    @staticmethod
    def zero(dim: int) -> "EndoMatrix":
        return EndoMatrix(dim)

    def __add__(self, other):
        entries = dict(self.entries)
        for key, c in other.entries.items():
            cur = entries.get(key)
            c = c if cur is None else cur + c
            if _is_zero(c):
                entries.pop(key, None)
            else:
                entries[key] = c
        return EndoMatrix(self.dim, entries)

    def __neg__(self):
        return EndoMatrix(self.dim, {k: -v for k, v in self.entries.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, EndoMatrix):
            return self.scale(other)
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        by_row = {}
        for (row, mid), c in other.entries.items():
            by_row.setdefault(row, []).append((mid, c))
        out = {}
        for (row, mid), ca in self.entries.items():
            for col, cb in by_row.get(mid, ()):  # self applied after other
                key = (row, col)
                add = ca * cb
                cur = out.get(key)
                add = add if cur is None else cur + add
                out[key] = add
        return EndoMatrix(self.dim, {k: v for k, v in out.items() if not _is_zero(v)})

    def __rmul__(self, other):
        return self.scale(other)

    def scale(self, s):
        return EndoMatrix(self.dim, {k: v * s for k, v in self.entries.items()})

    def apply(self, form: FormElement) -> FormElement:
        out = {}
        for (row, col), c in self.entries.items():
            fc = form.coeffs.get(col)
            if fc is None:
                continue
            add = c * fc
            cur = out.get(row)
            add = add if cur is None else cur + add
            out[row] = add
        return FormElement(self.dim, out)

    def trace(self):
        tr = None
        for (row, col), c in self.entries.items():
            if row == col:
                tr = c if tr is None else tr + c
        return tr if tr is not None else Scalar(0)

    def map_entries(self, fn) -> "EndoMatrix":
        return EndoMatrix(self.dim, {k: fn(v) for k, v in self.entries.items()})

    def is_zero(self) -> bool:
        return not self.entries

    def __eq__(self, other):
        if not isinstance(other, EndoMatrix):
            return NotImplemented
        return self.dim == other.dim and _coeffs_equal(self.entries, other.entries)

    def __repr__(self):
        return f"EndoMatrix(dim={self.dim}, nnz={len(self.entries)})"


def wedge_matrix(n: int, i: int) -> EndoMatrix:
    """Matrix of ``e^i ^ .`` in the subset basis."""
    entries = {}
    for col in all_subsets(n):
        sign, row = wedge_word((i,), col)
        if sign:
            entries[(row, col)] = Scalar.of(sign)
    return EndoMatrix(n, entries)


def contraction_matrix(n: int, i: int) -> EndoMatrix:
    """Matrix of the interior product against the i-th orthonormal generator."""
    entries = {}
    for col in all_subsets(n):
        if i not in col:
            continue
        pos = col.index(i)
        row = col[:pos] + col[pos + 1:]
        entries[(row, col)] = Scalar.of((-1) ** pos)
    return EndoMatrix(n, entries)


def wedge_word_matrix(n: int, subset) -> EndoMatrix:
    """Matrix of ``e^I ^ .`` for an increasing word I."""
    out = EndoMatrix.identity(n)
    for i in reversed(tuple(subset)):
        out = wedge_matrix(n, i) * out
    return out


def clifford_map(a: CliffordElement) -> EndoMatrix:
    """Algebra morphism Cl(V) -> End(Lambda V), v -> v^. - v-contraction."""
    n = a.n
    letters = {}

    def letter(i):
        if i not in letters:
            letters[i] = wedge_matrix(n, i) - contraction_matrix(n, i)
        return letters[i]

    out = EndoMatrix.zero(n)
    for word, c in a.coeffs.items():
        m = EndoMatrix.identity(n)
        for i in reversed(word):
            m = letter(i) * m
        out = out + m.scale(c)
    return out


def _letter_apply(n, i, form: FormElement) -> FormElement:
    """Apply c(e^i) = wedge minus contraction to a form directly."""
    out = {}
    for subset, c in form.coeffs.items():
        sign, merged = wedge_word((i,), subset)
        if sign:
            cur = out.get(merged)
            add = c * sign
            out[merged] = add if cur is None else cur + add
        if i in subset:
            pos = subset.index(i)
            row = subset[:pos] + subset[pos + 1:]
            cur = out.get(row)
            add = c * (-((-1) ** pos))
            out[row] = add if cur is None else cur + add
    return FormElement(n, out)


def symbol_map(a: CliffordElement) -> FormElement:
    """The linear isomorphism sending a Clifford word to the matching wedge word."""
    n = a.n
    total = FormElement(n)
    for word, c in a.coeffs.items():
        vec = FormElement.unit(n)
        for i in reversed(word):
            vec = _letter_apply(n, i, vec)
        total = total + vec.scale(c)
    return total


def berezin(omega: FormElement):
    """Top-degree coefficient; vanishes on all lower degrees."""
    return omega.top_coefficient()


class SpinorRep:
    """Fock-model spinor module for even n: S = Lambda(C^{n/2}).

    ``gamma[i]`` is the matrix of the i-th Clifford generator; the chirality
    operator is the complex volume element i^{n/2} gamma_1 ... gamma_n whose
    +-1 eigenspaces realize the graded pieces S^+ and S^-.
    """

    def __init__(self, n: int):
        if n % 2 != 0:
            raise ValueError("spinor module requires an even dimension")
        self.n = n
        m = n // 2
        self.fock_dim = m
        gammas = {}
        for k in range(1, m + 1):
            create = wedge_matrix(m, k)
            annihilate = contraction_matrix(m, k)
            gammas[2 * k - 1] = create - annihilate
            gammas[2 * k] = (create + annihilate).scale(Scalar.i())
        self.gamma = gammas
        vol = EndoMatrix.identity(m)
        for i in range(1, n + 1):
            vol = vol * gammas[i]
        self.chirality = vol.scale(Scalar.i() ** (n // 2))

    def represent(self, a: CliffordElement) -> EndoMatrix:
        if a.n != self.n:
            raise ValueError("dimension mismatch")
        out = EndoMatrix.zero(self.fock_dim)
        for word, c in a.coeffs.items():
            m = EndoMatrix.identity(self.fock_dim)
            for i in reversed(word):
                m = self.gamma[i] * m
            out = out + m.scale(c)
        return out

    def plus_minus_dims(self):
        """Dimensions of the +-1 chirality eigenspaces (diagonal chirality)."""
        plus = minus = 0
        for s in all_subsets(self.fock_dim):
            val = self.chirality.entries.get((s, s), Scalar(0))
            if val == Scalar(1):
                plus += 1
            elif val == Scalar(-1):
                minus += 1
            else:
                raise AssertionError("chirality is not diagonal +-1 in this basis")
        return plus, minus


def build_spinor_rep(n: int) -> SpinorRep:
    if n not in (2, 4, 6):
        raise ValueError("supported even dimensions are 2, 4, 6")
    return SpinorRep(n)


def supertrace(a: CliffordElement, rep: SpinorRep):
    """Graded trace on the spinor module: tr over S^+ minus tr over S^-."""
    weighted = rep.chirality * rep.represent(a)
    return weighted.trace()


# ---------------------------------------------------------------------------
# Rescaling maps
# ---------------------------------------------------------------------------

def getzler_on_forms(omega: FormElement) -> LambdaGraded:
    """Degree-k forms land at rescaling degree -k."""
    buckets = {}
    for subset, c in omega.coeffs.items():
        buckets.setdefault(-len(subset), {})[subset] = c
    return LambdaGraded(
        {d: FormElement(omega.n, coeffs) for d, coeffs in buckets.items()}
    )


def getzler_conjugate(q: EndoMatrix) -> LambdaGraded:
    """Conjugation grading: entry (row, col) lands at degree |col| - |row|.

    Wedge parts drop one degree, contraction parts gain one, matching the
    weights of the rescaling map on forms.
    """
    buckets = {}
    for (row, col), c in q.entries.items():
        buckets.setdefault(len(col) - len(row), {})[(row, col)] = c
    return LambdaGraded(
        {d: EndoMatrix(q.dim, entries) for d, entries in buckets.items()}
    )
