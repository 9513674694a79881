"""Exact scalar and polynomial arithmetic for curvature jets.

Everything downstream computes over three layers defined here:

* ``Scalar`` -- Gaussian rationals ``a + b*i`` with exact ``Fraction`` parts.
* ``PolyExpr`` -- multivariate polynomials in normal coordinates ``x^1..x^n``
  whose coefficients may carry commuting curvature indeterminates
  ``R[i,j,k,l]`` and first covariant derivatives ``R[i,j,k,l;m]``.
* ``LambdaGraded`` -- finite Laurent decompositions in a formal rescaling
  parameter; limits as the parameter goes to zero are read off as graded
  components, never as numerical limits.

Curvature indeterminates are canonicalized under the monoterm symmetries
(antisymmetry in each index pair, pair exchange).  Identities that need the
first Bianchi identity on top of those are checked numerically through
:func:`random_curvature`, which produces exact rational tensors satisfying
all symmetries including Bianchi.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Iterable, Optional

__all__ = [
    "Scalar",
    "PolyExpr",
    "LambdaGraded",
    "Valuation",
    "canonicalize_curvature",
    "random_curvature",
    "bianchi_cyclic_sum",
    "lambda_substitute",
    "valuation",
]


def _frac(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot build an exact rational from {value!r}")


class Scalar:
    """Gaussian rational ``re + im*i`` with exact rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = _frac(re)
        self.im = _frac(im)

    @staticmethod
    def of(value) -> "Scalar":
        if isinstance(value, Scalar):
            return value
        return Scalar(value)

    @staticmethod
    def i() -> "Scalar":
        return Scalar(0, 1)

    @staticmethod
    def _coerce(other):
        if isinstance(other, Scalar):
            return other
        if isinstance(other, (int, Fraction, str)):
            return Scalar(other)
        return None

    def __add__(self, other):
        other = Scalar._coerce(other)
        if other is None:
            return NotImplemented
        return Scalar(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return Scalar(-self.re, -self.im)

    def __sub__(self, other):
        other = Scalar._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = Scalar._coerce(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = Scalar._coerce(other)
        if other is None:
            return NotImplemented
        return Scalar(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def inverse(self) -> "Scalar":
        norm = self.re * self.re + self.im * self.im
        if norm == 0:
            raise ZeroDivisionError("inverse of zero Scalar")
        return Scalar(self.re / norm, -self.im / norm)

    def __truediv__(self, other):
        return self * Scalar.of(other).inverse()

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out = Scalar(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def conjugate(self) -> "Scalar":
        return Scalar(self.re, -self.im)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Scalar(other)
        if not isinstance(other, Scalar):
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def to_complex(self) -> complex:
        return complex(self.re) + 1j * complex(self.im)

    def __repr__(self):
        return f"Scalar({self})"

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            if self.im == 1:
                return "i"
            if self.im == -1:
                return "-i"
            return f"{self.im}i"
        sign = "+" if self.im > 0 else "-"
        mag = abs(self.im)
        istr = "i" if mag == 1 else f"{mag}i"
        return f"{self.re}{sign}{istr}"


ZERO = Scalar(0)
ONE = Scalar(1)


# ---------------------------------------------------------------------------
# Curvature indeterminates
# ---------------------------------------------------------------------------

def canonicalize_curvature(indices, derivs=()):
    """Canonical representative of ``R[i,j,k,l;derivs]`` under monoterm symmetries.

    Returns ``(sign, key)`` where ``key`` is ``None`` (and ``sign`` is 0)
    whenever the antisymmetries force the component to vanish.  The
    symmetries applied are ``R_ijkl = -R_jikl = -R_ijlk = R_klij``; the first
    Bianchi identity is deliberately *not* encoded here.
    """
    i, j, k, l = indices
    for idx in (i, j, k, l, *derivs):
        if idx < 1:
            raise ValueError(f"curvature index {idx} out of range (must be >= 1)")
    sign = 1
    if i == j or k == l:
        return 0, None
    if i > j:
        i, j = j, i
        sign = -sign
    if k > l:
        k, l = l, k
        sign = -sign
    if (i, j) > (k, l):
        i, j, k, l = k, l, i, j
    return sign, ("R", (i, j, k, l), tuple(derivs))


def curvature_str(key) -> str:
    _, (i, j, k, l), derivs = key
    if derivs:
        return f"R[{i},{j},{k},{l};{','.join(map(str, derivs))}]"
    return f"R[{i},{j},{k},{l}]"


# ---------------------------------------------------------------------------
# Polynomials
# ---------------------------------------------------------------------------

class PolyExpr:
    """Polynomial in ``x^1..x^n`` with curvature indeterminates.

    Terms are stored as a map ``(x-degrees, curvature-multiset) -> Scalar``
    with no zero coefficients.  ``trunc`` records the largest coordinate
    degree that is exact: a jet truncated at order ``K`` has unknown
    ``O(|x|^{K+1})`` content and all arithmetic propagates that bound.
    ``trunc=None`` means the polynomial is exact at every degree.
    """

    __slots__ = ("n", "terms", "trunc")

    def __init__(self, n: int, terms=None, trunc: Optional[int] = None):
        self.n = n
        self.trunc = trunc
        clean = {}
        if terms:
            for key, coeff in terms.items():
                coeff = Scalar.of(coeff)
                if coeff.is_zero():
                    continue
                if trunc is not None and sum(key[0]) > trunc:
                    continue
                if key in clean:
                    raise ValueError("duplicate term key")
                clean[key] = coeff
        self.terms = clean

    # -- constructors -------------------------------------------------------

    @staticmethod
    def constant(n: int, value, trunc=None) -> "PolyExpr":
        zero = (0,) * n
        return PolyExpr(n, {(zero, ()): Scalar.of(value)}, trunc)

    @staticmethod
    def zero(n: int, trunc=None) -> "PolyExpr":
        return PolyExpr(n, {}, trunc)

    @staticmethod
    def coordinate(n: int, i: int, trunc=None) -> "PolyExpr":
        if not 1 <= i <= n:
            raise ValueError(f"coordinate index {i} out of range 1..{n}")
        deg = tuple(1 if a == i else 0 for a in range(1, n + 1))
        return PolyExpr(n, {(deg, ()): ONE}, trunc)

    @staticmethod
    def curvature(n: int, indices, derivs=(), coeff=1, trunc=None) -> "PolyExpr":
        sign, key = canonicalize_curvature(indices, derivs)
        if sign == 0:
            return PolyExpr.zero(n, trunc)
        zero = (0,) * n
        return PolyExpr(n, {(zero, (key,)): Scalar.of(coeff) * sign}, trunc)

    # -- ring operations ----------------------------------------------------

    @staticmethod
    def _min_trunc(a, b):
        if a is None:
            return b
        if b is None:
            return a
        return min(a, b)

    def _coerce(self, other) -> "PolyExpr":
        if isinstance(other, PolyExpr):
            if other.n != self.n:
                raise ValueError("dimension mismatch")
            return other
        return PolyExpr.constant(self.n, other)

    def __add__(self, other):
        other = self._coerce(other)
        trunc = self._min_trunc(self.trunc, other.trunc)
        terms = dict(self.terms)
        for key, coeff in other.terms.items():
            acc = terms.get(key)
            coeff = coeff if acc is None else acc + coeff
            if coeff.is_zero():
                terms.pop(key, None)
            else:
                terms[key] = coeff
        return PolyExpr(self.n, terms, trunc)

    __radd__ = __add__

    def __neg__(self):
        return PolyExpr(self.n, {k: -c for k, c in self.terms.items()}, self.trunc)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, Scalar)):
            s = Scalar.of(other)
            if s.is_zero():
                return PolyExpr.zero(self.n, self.trunc)
            return PolyExpr(
                self.n, {k: c * s for k, c in self.terms.items()}, self.trunc
            )
        other = self._coerce(other)
        trunc = self._mul_trunc(other)
        terms = {}
        for (xa, ca), sa in self.terms.items():
            for (xb, cb), sb in other.terms.items():
                deg = tuple(p + q for p, q in zip(xa, xb))
                if trunc is not None and sum(deg) > trunc:
                    continue
                key = (deg, tuple(sorted(ca + cb)))
                acc = terms.get(key)
                coeff = sa * sb if acc is None else acc + sa * sb
                if coeff.is_zero():
                    terms.pop(key, None)
                else:
                    terms[key] = coeff
        return PolyExpr(self.n, terms, trunc)

    __rmul__ = __mul__

    def _mul_trunc(self, other):
        # unknown tail of one factor multiplies known part of the other:
        # exactness holds through min(trunc_a + val_b, trunc_b + val_a).
        if self.trunc is None and other.trunc is None:
            return None
        bounds = []
        if self.trunc is not None:
            vb = other._min_degree()
            bounds.append(self.trunc + (vb if vb is not None else 0))
        if other.trunc is not None:
            va = self._min_degree()
            bounds.append(other.trunc + (va if va is not None else 0))
        return min(bounds)

    def _min_degree(self):
        if not self.terms:
            return None
        return min(sum(k[0]) for k in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        if not isinstance(other, PolyExpr):
            try:
                other = self._coerce(other)
            except TypeError:
                return NotImplemented
        return self.n == other.n and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    # -- calculus and structure --------------------------------------------

    def derivative(self, i: int) -> "PolyExpr":
        """Partial derivative with respect to ``x^i`` (1-based)."""
        if not 1 <= i <= self.n:
            raise ValueError(f"coordinate index {i} out of range")
        pos = i - 1
        trunc = None if self.trunc is None else self.trunc - 1
        terms = {}
        for (deg, curv), coeff in self.terms.items():
            e = deg[pos]
            if e == 0:
                continue
            newdeg = deg[:pos] + (e - 1,) + deg[pos + 1:]
            key = (newdeg, curv)
            acc = terms.get(key)
            add = coeff * e
            terms[key] = add if acc is None else acc + add
        return PolyExpr(self.n, {k: c for k, c in terms.items() if not c.is_zero()}, trunc)

    def truncated(self, order: int) -> "PolyExpr":
        trunc = order if self.trunc is None else min(self.trunc, order)
        return PolyExpr(self.n, self.terms, trunc)

    def degree_component(self, d: int) -> "PolyExpr":
        terms = {k: c for k, c in self.terms.items() if sum(k[0]) == d}
        return PolyExpr(self.n, terms, self.trunc)

    def coefficient(self, degrees, curv_keys=()) -> Scalar:
        key = (tuple(degrees), tuple(sorted(curv_keys)))
        return self.terms.get(key, ZERO)

    def constant_term(self) -> "PolyExpr":
        return self.degree_component(0)

    def max_degree(self):
        if not self.terms:
            return None
        return max(sum(k[0]) for k in self.terms)

    def eval_point(self, point) -> Scalar:
        """Evaluate at a numeric point; curvature indeterminates must be gone."""
        out = ZERO
        for (deg, curv), coeff in self.terms.items():
            if curv:
                raise ValueError("cannot evaluate: curvature indeterminates present")
            val = coeff
            for e, x in zip(deg, point):
                if e:
                    val = val * (Scalar.of(x) ** e)
            out = out + val
        return out

    def substitute_curvature(self, tensor, nabla_tensor=None) -> "PolyExpr":
        """Replace curvature indeterminates by exact numeric values.

        ``tensor[(i,j,k,l)]`` supplies ``R`` components; derivative symbols
        are looked up in ``nabla_tensor[(m,i,j,k,l)]`` and default to zero,
        which is sound for identities tested below cubic coordinate degree.
        """
        terms = {}
        for (deg, curv), coeff in self.terms.items():
            value = coeff
            dead = False
            for key in curv:
                _, idx, derivs = key
                if derivs:
                    if nabla_tensor is None:
                        dead = True
                        break
                    value = value * Scalar.of(nabla_tensor[(derivs[0],) + idx])
                else:
                    value = value * Scalar.of(tensor[idx])
            if dead or value.is_zero():
                continue
            key2 = (deg, ())
            acc = terms.get(key2)
            terms[key2] = value if acc is None else acc + value
        return PolyExpr(self.n, {k: c for k, c in terms.items() if not c.is_zero()}, self.trunc)

    def eq_mod(self, other, through=None) -> bool:
        """Exact equality of all coefficients up to the common trusted degree."""
        other = self._coerce(other)
        cut = PolyExpr._min_trunc(self.trunc, other.trunc)
        cut = PolyExpr._min_trunc(cut, through)
        diff = self - other
        if cut is None:
            return diff.is_zero()
        return all(sum(k[0]) > cut for k in diff.terms)

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for (deg, curv), coeff in sorted(
            self.terms.items(), key=lambda kv: (sum(kv[0][0]), kv[0])
        ):
            factors = []
            cs = str(coeff)
            for pos, e in enumerate(deg):
                if e == 1:
                    factors.append(f"x{pos + 1}")
                elif e > 1:
                    factors.append(f"x{pos + 1}^{e}")
            factors.extend(curvature_str(k) for k in curv)
            if factors:
                if cs == "1":
                    parts.append(" ".join(factors))
                elif cs == "-1":
                    parts.append("-" + " ".join(factors))
                else:
                    coeff_s = f"({cs})" if ("+" in cs[1:] or "-" in cs[1:]) else cs
                    parts.append(coeff_s + " " + " ".join(factors))
            else:
                parts.append(f"({cs})" if ("+" in cs[1:] or "-" in cs[1:]) else cs)
        out = parts[0]
        for p in parts[1:]:
            out += " - " + p[1:] if p.startswith("-") else " + " + p
        return out

    def __repr__(self):
        return f"PolyExpr({self})"


# ---------------------------------------------------------------------------
# Valuation
# ---------------------------------------------------------------------------

class Valuation:
    """Minimum coordinate degree of a truncated jet, truncation-aware.

    For a zero-mod-truncation jet the true valuation is only bounded below,
    so the result is flagged rather than silently reported as infinite.
    """

    __slots__ = ("value", "lower_bound", "truncation_limited")

    def __init__(self, value=None, lower_bound=None, truncation_limited=False):
        self.value = value
        self.lower_bound = lower_bound if value is None else value
        self.truncation_limited = truncation_limited

    @property
    def is_finite(self) -> bool:
        return self.value is not None

    def at_least(self, q: int) -> bool:
        return self.lower_bound >= q if self.value is None else self.value >= q

    def __eq__(self, other):
        if isinstance(other, int):
            return self.value == other
        if isinstance(other, Valuation):
            return (self.value, self.lower_bound, self.truncation_limited) == (
                other.value, other.lower_bound, other.truncation_limited)
        return NotImplemented

    def __repr__(self):
        if self.is_finite:
            return f"Valuation({self.value})"
        flag = ", truncation_limited" if self.truncation_limited else ""
        return f"Valuation(>= {self.lower_bound}{flag})"


def valuation(p: PolyExpr) -> Valuation:
    """Valuation of a jet: minimum total coordinate degree of a nonzero term."""
    d = p._min_degree()
    if d is not None:
        return Valuation(value=d)
    if p.trunc is None:
        # genuinely the zero polynomial
        return Valuation(lower_bound=None, truncation_limited=False)
    return Valuation(lower_bound=p.trunc + 1, truncation_limited=True)


# ---------------------------------------------------------------------------
# Formal rescaling grading
# ---------------------------------------------------------------------------

class LambdaGraded:
    """Finite Laurent decomposition in the formal rescaling parameter.

    Components live at integer degrees (possibly negative) and must support
    ring operations; products convolve gradings.
    """

    __slots__ = ("components",)

    def __init__(self, components=None):
        self.components = {}
        if components:
            for deg, val in components.items():
                if _nonzero(val):
                    self.components[deg] = val

    def __add__(self, other):
        comps = dict(self.components)
        for deg, val in other.components.items():
            cur = comps.get(deg)
            val = val if cur is None else cur + val
            if _nonzero(val):
                comps[deg] = val
            else:
                comps.pop(deg, None)
        return LambdaGraded(comps)

    def __neg__(self):
        return LambdaGraded({d: -v for d, v in self.components.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, LambdaGraded):
            return LambdaGraded(
                {d: v * other for d, v in self.components.items()}
            )
        comps = {}
        for da, va in self.components.items():
            for db, vb in other.components.items():
                deg = da + db
                prod = va * vb
                cur = comps.get(deg)
                prod = prod if cur is None else cur + prod
                comps[deg] = prod
        return LambdaGraded(comps)

    __rmul__ = __mul__

    def shift(self, k: int) -> "LambdaGraded":
        return LambdaGraded({d + k: v for d, v in self.components.items()})

    def degrees(self):
        return sorted(self.components)

    def min_degree(self):
        return min(self.components) if self.components else None

    def component(self, deg: int):
        return self.components.get(deg)

    def is_zero(self) -> bool:
        return not self.components

    def __eq__(self, other):
        if not isinstance(other, LambdaGraded):
            return NotImplemented
        if set(self.components) != set(other.components):
            return False
        return all(self.components[d] == other.components[d] for d in self.components)

    def map(self, fn) -> "LambdaGraded":
        return LambdaGraded({d: fn(v) for d, v in self.components.items()})

    def __repr__(self):
        inner = ", ".join(f"{d}: {v}" for d, v in sorted(self.components.items()))
        return "LambdaGraded({" + inner + "})"


def _nonzero(val) -> bool:
    probe = getattr(val, "is_zero", None)
    if probe is not None:
        return not probe()
    return val != 0


def lambda_substitute(p: PolyExpr, extra_weight: int = 0) -> LambdaGraded:
    """Formal grading of ``p`` under ``x -> lambda x``.

    A monomial of coordinate degree ``d`` lands at degree ``d + extra_weight``;
    ``extra_weight`` carries any Gilkey/homogeneity bookkeeping.
    """
    buckets = {}
    for (deg, curv), coeff in p.terms.items():
        d = sum(deg) + extra_weight
        bucket = buckets.setdefault(d, {})
        bucket[(deg, curv)] = coeff
    return LambdaGraded(
        {d: PolyExpr(p.n, terms, p.trunc) for d, terms in buckets.items()}
    )


# ---------------------------------------------------------------------------
# Numeric curvature oracle
# ---------------------------------------------------------------------------

def _antisym_pair(t, n, first: bool):
    out = {}
    for (i, j, k, l), v in t.items():
        if first:
            out[(i, j, k, l)] = out.get((i, j, k, l), Fraction(0)) + v / 2
            out[(j, i, k, l)] = out.get((j, i, k, l), Fraction(0)) - v / 2
        else:
            out[(i, j, k, l)] = out.get((i, j, k, l), Fraction(0)) + v / 2
            out[(i, j, l, k)] = out.get((i, j, l, k), Fraction(0)) - v / 2
    return out


def _pair_sym(t):
    out = {}
    for (i, j, k, l), v in t.items():
        out[(i, j, k, l)] = out.get((i, j, k, l), Fraction(0)) + v / 2
        out[(k, l, i, j)] = out.get((k, l, i, j), Fraction(0)) + v / 2
    return out


def bianchi_cyclic_sum(t, idx) -> Fraction:
    """First Bianchi cyclic sum over the last three indices at ``idx``."""
    i, j, k, l = idx
    return t[(i, j, k, l)] + t[(i, k, l, j)] + t[(i, l, j, k)]


def _bianchi_project(t):
    out = {}
    for idx, v in t.items():
        out[idx] = v - bianchi_cyclic_sum(t, idx) / 3
    return out


def curvature_projection(t, n):
    """Project a raw 4-tensor onto algebraic curvature tensors.

    Antisymmetrizes both index pairs, symmetrizes the pair exchange, then
    removes the cyclic (Bianchi-violating) part.  Idempotent; tested.
    """
    full = {}
    rng = range(1, n + 1)
    for i in rng:
        for j in rng:
            for k in rng:
                for l in rng:
                    full[(i, j, k, l)] = t.get((i, j, k, l), Fraction(0))
    full = _antisym_pair(full, n, first=True)
    full = _antisym_pair(full, n, first=False)
    full = _pair_sym(full)
    full = _bianchi_project(full)
    return full


def random_curvature(n: int, seed=0):
    """Random exact-rational curvature tensor with all symmetries and Bianchi.

    Only even dimensions up to 6 are supported, matching the spinor side.
    """
    if n % 2 != 0:
        raise ValueError("random_curvature requires an even dimension")
    if n not in (2, 4, 6):
        raise ValueError("supported dimensions are 2, 4, 6")
    rng = random.Random(seed)
    raw = {}
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            for k in range(1, n + 1):
                for l in range(1, n + 1):
                    raw[(i, j, k, l)] = Fraction(rng.randint(-12, 12), rng.randint(1, 8))
    return curvature_projection(raw, n)
