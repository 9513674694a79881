"""Normal-coordinate jets of the metric, vielbeins and connection symbols,
plus the Gilkey-order/valuation bookkeeping for polynomials in those jets.

All expansions are truncated at a configurable order ``K`` (default 3, the
deepest order with printed coefficients) and every jet carries its trusted
truncation so that derived quantities report how far they are exact.

A ``GeometricPolynomial`` pairs an expanded jet with a provenance tree
recording its factorization into derivatives of vielbein entries.  The jet is
what limits and equality checks consume; the tree is what the Gilkey order
and the per-monomial weight ``theta`` are computed from.  The tree is never
expanded into monomials wholesale (compositions would blow up); ``theta`` is
a lazy minimum over the formal expansion instead.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import permutations

from .algebra import (
    LambdaGraded,
    PolyExpr,
    Scalar,
    Valuation,
    lambda_substitute,
    valuation,
)

__all__ = [
    "JetContext",
    "MetricJet",
    "VielbeinJet",
    "VielbeinFactor",
    "GeomMonomial",
    "GeometricPolynomial",
    "metric_expansion",
    "vielbein_expansion",
    "christoffel",
    "christoffel_frame",
    "theta_functional",
    "pullback_flambda",
    "valuation_limit",
    "LimitVerdict",
]


THIRD = Fraction(1, 3)
SIXTH = Fraction(1, 6)
TWELFTH = Fraction(1, 12)


# ---------------------------------------------------------------------------
# Provenance trees
# ---------------------------------------------------------------------------

class VielbeinFactor:
    """One derivative-of-vielbein factor ``D^beta a_i^l`` or ``D^beta b_l^i``."""

    __slots__ = ("kind", "lower", "upper", "derivs")

    def __init__(self, kind: str, lower: int, upper: int, derivs=()):
        if kind not in ("a", "b"):
            raise ValueError("factor kind must be 'a' or 'b'")
        self.kind = kind
        self.lower = lower
        self.upper = upper
        self.derivs = tuple(sorted(derivs))

    def key(self):
        return (self.kind, self.lower, self.upper, self.derivs)

    def with_derivs(self, extra) -> "VielbeinFactor":
        return VielbeinFactor(self.kind, self.lower, self.upper,
                              self.derivs + tuple(extra))

    def base_jet(self, ctx: "JetContext") -> PolyExpr:
        if self.kind == "a":
            return ctx.a_entry(self.lower, self.upper)
        return ctx.b_entry(self.lower, self.upper)

    def jet(self, ctx: "JetContext") -> PolyExpr:
        out = self.base_jet(ctx)
        for i in self.derivs:
            out = out.derivative(i)
        return out

    def theta(self, ctx: "JetContext"):
        """max(#derivatives, valuation of the underived entry), exactness flag."""
        val = valuation(self.base_jet(ctx))
        if val.is_finite:
            return max(len(self.derivs), val.value), True
        return max(len(self.derivs), val.lower_bound or 0), not val.truncation_limited

    def __repr__(self):
        d = f";{','.join(map(str, self.derivs))}" if self.derivs else ""
        return f"{self.kind}[{self.lower},{self.upper}{d}]"


class _Node:
    __slots__ = ("memo",)

    def __init__(self):
        self.memo = {}


class _Leaf(_Node):
    __slots__ = ("factor",)

    def __init__(self, factor):
        super().__init__()
        self.factor = factor


class _Const(_Node):
    __slots__ = ()


_CONST = _Const()


class _Sum(_Node):
    __slots__ = ("children",)

    def __init__(self, children):
        super().__init__()
        self.children = tuple(children)


class _Prod(_Node):
    __slots__ = ("left", "right")

    def __init__(self, left, right):
        super().__init__()
        self.left = left
        self.right = right


class _Deriv(_Node):
    __slots__ = ("child", "index")

    def __init__(self, child, index):
        super().__init__()
        self.child = child
        self.index = index


def _splittings(derivs):
    """All ways to distribute a derivative multiset over two factors."""
    if not derivs:
        return [((), ())]
    head, rest = derivs[0], derivs[1:]
    out = []
    for left, right in _splittings(rest):
        out.append(((head,) + left, right))
        out.append((left, (head,) + right))
    return out


def _theta_min(node, pending, ctx):
    """Minimum theta over the formal monomial expansion of ``node`` after
    applying the pending derivative multiset; ``None`` for the zero branch."""
    memo = node.memo
    if pending in memo:
        return memo[pending]
    if isinstance(node, _Deriv):
        result = _theta_min(node.child, tuple(sorted(pending + (node.index,))), ctx)
    elif isinstance(node, _Const):
        result = (0, True) if not pending else None
    elif isinstance(node, _Leaf):
        result = node.factor.with_derivs(pending).theta(ctx)
    elif isinstance(node, _Sum):
        best = None
        for child in node.children:
            got = _theta_min(child, pending, ctx)
            if got is None:
                continue
            if best is None or got[0] < best[0]:
                best = got
            elif got[0] == best[0]:
                best = (best[0], best[1] and got[1])
        result = best
    elif isinstance(node, _Prod):
        best = None
        for left_d, right_d in _splittings(pending):
            l = _theta_min(node.left, left_d, ctx)
            if l is None:
                continue
            r = _theta_min(node.right, right_d, ctx)
            if r is None:
                continue
            cand = (l[0] + r[0], l[1] and r[1])
            if best is None or cand[0] < best[0]:
                best = cand
            elif cand[0] == best[0]:
                best = (best[0], best[1] and cand[1])
        result = best
    else:
        raise TypeError(node)
    memo[pending] = result
    return result


def _iter_monomials(node, pending, coeff_one=True):
    """Enumerate the formal monomial expansion (for small polynomials only)."""
    if isinstance(node, _Deriv):
        yield from _iter_monomials(node.child, tuple(sorted(pending + (node.index,))))
    elif isinstance(node, _Const):
        if not pending:
            yield ()
    elif isinstance(node, _Leaf):
        yield (node.factor.with_derivs(pending),)
    elif isinstance(node, _Sum):
        for child in node.children:
            yield from _iter_monomials(child, pending)
    elif isinstance(node, _Prod):
        for left_d, right_d in _splittings(pending):
            for lm in _iter_monomials(node.left, left_d):
                for rm in _iter_monomials(node.right, right_d):
                    yield lm + rm
    else:
        raise TypeError(node)


class GeomMonomial:
    """One term of the formal expansion: a tuple of vielbein factors.

    Only used for inspection and the per-monomial ``theta``; the engine
    itself works on the unexpanded tree.
    """

    __slots__ = ("factors",)

    def __init__(self, factors=()):
        self.factors = tuple(sorted(factors, key=lambda f: f.key()))

    def gilkey(self) -> int:
        return sum(len(f.derivs) for f in self.factors)

    def jet(self, ctx) -> PolyExpr:
        out = PolyExpr.constant(ctx.n, 1, trunc=ctx.K)
        for f in self.factors:
            out = out * f.jet(ctx)
        return out

    def theta(self, ctx):
        total, exact = 0, True
        for f in self.factors:
            v, ok = f.theta(ctx)
            total += v
            exact = exact and ok
        return total, exact

    def __repr__(self):
        return " ".join(map(repr, self.factors)) or "1"


class GeometricPolynomial:
    """Expanded jet plus factorization provenance, at a fixed Gilkey order."""

    __slots__ = ("ctx", "_jet", "_gilkey", "prov")

    def __init__(self, ctx, jet, gilkey, prov):
        self.ctx = ctx
        self._jet = jet
        self._gilkey = gilkey
        self.prov = prov

    # -- constructors ---------------------------------------------------------

    @staticmethod
    def zero(ctx) -> "GeometricPolynomial":
        return GeometricPolynomial(ctx, PolyExpr.zero(ctx.n), None, None)

    @staticmethod
    def constant(ctx, c) -> "GeometricPolynomial":
        c = Scalar.of(c)
        if c.is_zero():
            return GeometricPolynomial.zero(ctx)
        return GeometricPolynomial(ctx, PolyExpr.constant(ctx.n, c), 0, _CONST)

    @staticmethod
    def factor(ctx, f: VielbeinFactor) -> "GeometricPolynomial":
        return GeometricPolynomial(ctx, f.jet(ctx), len(f.derivs), _Leaf(f))

    # -- algebra ---------------------------------------------------------------

    def _require_ctx(self, other):
        if other.ctx is not self.ctx:
            raise ValueError("mixing geometric polynomials from different contexts")

    def __add__(self, other):
        if not isinstance(other, GeometricPolynomial):
            other = GeometricPolynomial.constant(self.ctx, other)
        self._require_ctx(other)
        if other.prov is None:
            return self
        if self.prov is None:
            return other
        if self._gilkey != other._gilkey:
            raise ValueError(
                f"mixed Gilkey orders {self._gilkey} and {other._gilkey}"
            )
        return GeometricPolynomial(
            self.ctx, self._jet + other._jet, self._gilkey,
            _Sum((self.prov, other.prov)),
        )

    __radd__ = __add__

    def __neg__(self):
        return self * Scalar(-1)

    def __sub__(self, other):
        if not isinstance(other, GeometricPolynomial):
            other = GeometricPolynomial.constant(self.ctx, other)
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, GeometricPolynomial):
            self._require_ctx(other)
            if self.prov is None or other.prov is None:
                return GeometricPolynomial.zero(self.ctx)
            return GeometricPolynomial(
                self.ctx, self._jet * other._jet,
                self._gilkey + other._gilkey,
                _Prod(self.prov, other.prov),
            )
        s = Scalar.of(other)
        if s.is_zero() or self.prov is None:
            return GeometricPolynomial.zero(self.ctx)
        # scalar multiples do not change the factor structure
        return GeometricPolynomial(self.ctx, self._jet * s, self._gilkey, self.prov)

    __rmul__ = __mul__

    def derivative(self, i: int) -> "GeometricPolynomial":
        if self.prov is None:
            return self
        return GeometricPolynomial(
            self.ctx, self._jet.derivative(i), self._gilkey + 1,
            _Deriv(self.prov, i),
        )

    # -- structure ---------------------------------------------------------------

    def jet(self) -> PolyExpr:
        return self._jet

    def gilkey_order(self):
        return self._gilkey

    def is_zero_jet(self) -> bool:
        return self._jet.is_zero()

    @property
    def is_invisible(self) -> bool:
        """Structurally absent: no provenance, or exactly zero at all degrees
        (a zero mod truncation is *not* invisible; it bounds what is known)."""
        return self.prov is None or (
            self._jet.is_zero() and self._jet.trunc is None
        )

    def theta(self):
        """Minimum per-monomial weight over the formal expansion.

        Decomposition-dependent by construction; the grading of the expanded
        jet is the decomposition-free counterpart.
        """
        if self.prov is None:
            raise ValueError("theta of the zero polynomial (no provenance)")
        got = _theta_min(self.prov, (), self.ctx)
        if got is None:
            raise ValueError("provenance expansion is formally zero")
        return got

    def monomials(self, limit=20000):
        """Expanded monomials, for inspection of small polynomials."""
        if self.prov is None:
            return []
        out = []
        for factors in _iter_monomials(self.prov, ()):
            out.append(GeomMonomial(factors))
            if len(out) > limit:
                raise ValueError("monomial expansion too large")
        return out

    def __repr__(self):
        return f"GeometricPolynomial(gilkey={self._gilkey}, jet={self._jet})"


def theta_functional(ctx, poly: GeometricPolynomial):
    """The rescaling weight of a geometric polynomial: min over monomials of
    the sum of max(#derivatives, valuation) across its vielbein factors."""
    if poly.ctx is not ctx:
        raise ValueError("theta requires the owning context")
    return poly.theta()


# ---------------------------------------------------------------------------
# Context and jets
# ---------------------------------------------------------------------------

class JetContext:
    """Dimension, truncation order and curvature data at the base point.

    ``curvature`` is one of ``"symbolic"`` (components stay indeterminate),
    ``"flat"`` (all components zero) or ``"numeric"`` with a tensor mapping
    ``(i,j,k,l)`` to exact rationals; ``nabla`` optionally supplies
    ``(m,i,j,k,l)`` components of the covariant derivative.
    """

    def __init__(self, n: int, K: int = 3, curvature: str = "symbolic",
                 tensor=None, nabla=None):
        if K < 2:
            raise ValueError("truncation order must be at least 2")
        if K > 3:
            raise ValueError("jets beyond order 3 are unsupported")
        if curvature not in ("symbolic", "flat", "numeric"):
            raise ValueError(f"unknown curvature mode {curvature!r}")
        if curvature == "numeric" and tensor is None:
            raise ValueError("numeric curvature mode needs a tensor")
        self.n = n
        self.K = K
        self.curvature = curvature
        self.tensor = tensor
        self.nabla = nabla
        self._cache = {}

    # -- scalars ----------------------------------------------------------------

    def curv(self, indices, derivs=()) -> PolyExpr:
        if self.curvature == "flat":
            return PolyExpr.zero(self.n)
        if self.curvature == "numeric":
            from .algebra import canonicalize_curvature

            sign, key = canonicalize_curvature(indices, derivs)
            if sign == 0:
                return PolyExpr.zero(self.n)
            _, idx, der = key
            if der:
                if self.nabla is None:
                    return PolyExpr.zero(self.n)
                value = Fraction(self.nabla[(der[0],) + idx])
            else:
                value = Fraction(self.tensor[idx])
            return PolyExpr.constant(self.n, Scalar(value * sign))
        return PolyExpr.curvature(self.n, indices, derivs)

    def x(self, i: int) -> PolyExpr:
        return PolyExpr.coordinate(self.n, i)

    def const(self, c) -> PolyExpr:
        return PolyExpr.constant(self.n, c)

    @property
    def jet_cut(self):
        """Truncation applied to constructed jets; flat space is exact."""
        return None if self.curvature == "flat" else self.K

    def clip(self, p: PolyExpr) -> PolyExpr:
        return p if self.jet_cut is None else p.truncated(self.jet_cut)

    @property
    def range1(self):
        return range(1, self.n + 1)

    def _get(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    # -- printed vielbein entry jets ----------------------------------------------

    def a_entry(self, i: int, l: int) -> PolyExpr:
        def build():
            out = PolyExpr.constant(self.n, 1 if i == l else 0)
            for j in self.range1:
                for k in self.range1:
                    out = out - self.curv((i, j, k, l)) * self.x(j) * self.x(k) * SIXTH
            if self.K >= 3:
                for j in self.range1:
                    for k in self.range1:
                        for t in self.range1:
                            out = out - (
                                self.curv((i, j, k, l), (t,))
                                * self.x(j) * self.x(k) * self.x(t) * TWELFTH
                            )
            return self.clip(out)

        return self._get(("a_entry", i, l), build)

    def b_entry(self, l: int, i: int) -> PolyExpr:
        def build():
            out = PolyExpr.constant(self.n, 1 if i == l else 0)
            for j in self.range1:
                for k in self.range1:
                    out = out + self.curv((l, j, k, i)) * self.x(j) * self.x(k) * SIXTH
            if self.K >= 3:
                for j in self.range1:
                    for k in self.range1:
                        for t in self.range1:
                            out = out + (
                                self.curv((l, j, k, i), (t,))
                                * self.x(j) * self.x(k) * self.x(t) * TWELFTH
                            )
            return self.clip(out)

        return self._get(("b_entry", l, i), build)

    # -- cached jet families -------------------------------------------------------

    @property
    def metric(self) -> "MetricJet":
        return self._get("metric", lambda: metric_expansion(self))

    @property
    def vielbein(self) -> "VielbeinJet":
        return self._get("vielbein", lambda: vielbein_expansion(self))

    @property
    def christoffel_jets(self):
        return self._get("christoffel", lambda: christoffel(self))

    @property
    def spin_connection_jets(self):
        """omega[i][s][t] = g(nabla_{d/dx^i} e_s, e_t) as expanded jets."""

        def build():
            return [
                [
                    [self.geo_spin_connection(i, s, t).jet() for t in self.range1]
                    for s in self.range1
                ]
                for i in self.range1
            ]

        return self._get("spin_connection", build)

    @property
    def christoffel_frame_jets(self):
        return self._get("christoffel_frame", lambda: christoffel_frame(self))

    # -- geometric accessors ----------------------------------------------------------

    def geo_a(self, i: int, l: int) -> GeometricPolynomial:
        return self._get(
            ("geo_a", i, l),
            lambda: GeometricPolynomial.factor(self, VielbeinFactor("a", i, l)),
        )

    def geo_b(self, l: int, i: int) -> GeometricPolynomial:
        return self._get(
            ("geo_b", l, i),
            lambda: GeometricPolynomial.factor(self, VielbeinFactor("b", l, i)),
        )

    def geo_const(self, c) -> GeometricPolynomial:
        return GeometricPolynomial.constant(self, c)

    def geo_metric(self, i: int, j: int) -> GeometricPolynomial:
        def build():
            total = GeometricPolynomial.zero(self)
            for l in self.range1:
                total = total + self.geo_a(i, l) * self.geo_a(j, l)
            return total

        return self._get(("geo_metric", i, j), build)

    def geo_metric_inv(self, i: int, j: int) -> GeometricPolynomial:
        def build():
            total = GeometricPolynomial.zero(self)
            for l in self.range1:
                total = total + self.geo_b(l, i) * self.geo_b(l, j)
            return total

        return self._get(("geo_metric_inv", i, j), build)

    def geo_christoffel(self, i: int, j: int, k: int) -> GeometricPolynomial:
        def build():
            half = Fraction(1, 2)
            total = GeometricPolynomial.zero(self)
            for l in self.range1:
                term = (
                    self.geo_metric(j, l).derivative(i)
                    + self.geo_metric(i, l).derivative(j)
                    - self.geo_metric(i, j).derivative(l)
                )
                total = total + self.geo_metric_inv(k, l) * term * half
            return total

        return self._get(("geo_christoffel", i, j, k), build)

    def geo_spin_connection(self, i: int, s: int, t: int) -> GeometricPolynomial:
        """Connection coefficient g(nabla_{d/dx^i} e_s, e_t) in vielbein jets."""

        def build():
            total = GeometricPolynomial.zero(self)
            for k in self.range1:
                inner = self.geo_b(s, k).derivative(i)
                for j in self.range1:
                    inner = inner + self.geo_b(s, j) * self.geo_christoffel(i, j, k)
                total = total + inner * self.geo_a(k, t)
            return total

        return self._get(("geo_spin_connection", i, s, t), build)

    def geo_christoffel_frame(self, l: int, s: int, t: int) -> GeometricPolynomial:
        def build():
            total = GeometricPolynomial.zero(self)
            for i in self.range1:
                total = total + self.geo_b(l, i) * self.geo_spin_connection(i, s, t)
            return total

        return self._get(("geo_christoffel_frame", l, s, t), build)

    def geo_frame_curvature(self, i, j, s, t) -> GeometricPolynomial:
        """Curvature of the frame connection; the constant term reproduces the
        curvature components modulo the first Bianchi identity."""

        def build():
            core = (
                self.geo_spin_connection(j, s, t).derivative(i)
                - self.geo_spin_connection(i, s, t).derivative(j)
            )
            for u in self.range1:
                core = core + (
                    self.geo_spin_connection(j, s, u) * self.geo_spin_connection(i, u, t)
                    - self.geo_spin_connection(i, s, u) * self.geo_spin_connection(j, u, t)
                )
            return core

        return self._get(("geo_frame_curvature", i, j, s, t), build)

    def frame_curvature(self, i, j, s, t) -> PolyExpr:
        return self.geo_frame_curvature(i, j, s, t).jet()

    def geo_scal(self) -> GeometricPolynomial:
        """Scalar curvature as a jet of Gilkey order two."""

        def build():
            total = GeometricPolynomial.zero(self)
            for a in self.range1:
                for b in self.range1:
                    for i in self.range1:
                        for j in self.range1:
                            total = total + (
                                self.geo_b(a, i) * self.geo_b(b, j)
                                * self.geo_frame_curvature(i, j, b, a)
                            )
            return total

        return self._get("geo_scal", build)


class MetricJet:
    """Metric, inverse and volume-factor jets; all mod degree K+1."""

    def __init__(self, g, g_inv, j_g, K):
        self.g = g
        self.g_inv = g_inv
        self.j_g = j_g
        self.K = K


class VielbeinJet:
    def __init__(self, a, b, K):
        self.a = a
        self.b = b
        self.K = K


def metric_expansion(ctx: JetContext) -> MetricJet:
    """Printed jets of the metric; inverse recomputed by a Neumann series."""
    n, K = ctx.n, ctx.K
    g = []
    for i in ctx.range1:
        row = []
        for j in ctx.range1:
            entry = PolyExpr.constant(n, 1 if i == j else 0)
            for k in ctx.range1:
                for l in ctx.range1:
                    entry = entry - ctx.curv((i, k, l, j)) * ctx.x(k) * ctx.x(l) * THIRD
            if K >= 3:
                for k in ctx.range1:
                    for l in ctx.range1:
                        for m in ctx.range1:
                            entry = entry - (
                                ctx.curv((i, k, l, j), (m,))
                                * ctx.x(k) * ctx.x(l) * ctx.x(m) * SIXTH
                            )
            row.append(ctx.clip(entry))
        g.append(row)

    cut = ctx.jet_cut
    g_inv = _neumann_inverse(g, n, K, cut)
    j_g = _sqrt_jet(_det_jet(g, n, cut), n, K, cut)
    return MetricJet(g, g_inv, j_g, K)


def _neumann_inverse(g, n, K, cut):
    """Inverse of a jet matrix with g(0) = Id via the geometric series."""
    h = [
        [g[i][j] - PolyExpr.constant(n, 1 if i == j else 0) for j in range(n)]
        for i in range(n)
    ]
    power = [[PolyExpr.constant(n, 1 if i == j else 0) for j in range(n)] for i in range(n)]
    out = [row[:] for row in power]
    sign = 1
    # valuation of h is >= 2, so the series stops well inside K steps
    for _ in range(K):
        sign = -sign
        power = _mat_mul(power, h, n, cut)
        for i in range(n):
            for j in range(n):
                out[i][j] = out[i][j] + power[i][j] * sign
    return [[_cut(entry, cut) for entry in row] for row in out]


def _cut(p, cut):
    return p if cut is None else p.truncated(cut)


def _mat_mul(a, b, n, cut):
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = PolyExpr.zero(n)
            for k in range(n):
                acc = acc + a[i][k] * b[k][j]
            row.append(_cut(acc, cut))
        out.append(row)
    return out


def _det_jet(g, n, cut):
    out = PolyExpr.zero(n)
    for perm in permutations(range(n)):
        sign = _perm_sign(perm)
        term = PolyExpr.constant(n, sign)
        for i in range(n):
            term = term * g[i][perm[i]]
        out = _cut(out + term, cut)
    return out


def _perm_sign(perm):
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def _sqrt_jet(p, n, K, cut):
    """Unique jet q with q^2 = p mod degree K+1 and q(0) = 1."""
    if p.coefficient((0,) * n) != Scalar(1):
        raise ValueError("sqrt jet requires constant term 1")
    q = PolyExpr.constant(n, 1)
    half = Fraction(1, 2)
    for _ in range(K):
        corr = (p - q * q) * half
        q = _cut(q + corr, cut)
    if not (q * q).eq_mod(p):
        raise AssertionError("sqrt jet iteration failed to converge")
    return q


def vielbein_expansion(ctx: JetContext) -> VielbeinJet:
    a = [[ctx.a_entry(i, l) for l in ctx.range1] for i in ctx.range1]
    b = [[ctx.b_entry(l, i) for i in ctx.range1] for l in ctx.range1]
    return VielbeinJet(a, b, ctx.K)


def christoffel(ctx: JetContext):
    """Coordinate-frame Christoffel jets from the Koszul formula."""
    n, K = ctx.n, ctx.K
    g = ctx.metric.g
    g_inv = ctx.metric.g_inv
    half = Fraction(1, 2)
    out = []
    for i in range(n):
        plane = []
        for j in range(n):
            row = []
            for k in range(n):
                acc = PolyExpr.zero(n)
                for l in range(n):
                    acc = acc + g_inv[k][l] * (
                        g[j][l].derivative(i + 1)
                        + g[i][l].derivative(j + 1)
                        - g[i][j].derivative(l + 1)
                    )
                row.append(ctx.clip(acc * half))
            plane.append(row)
        out.append(plane)
    return out


def christoffel_frame(ctx: JetContext):
    """Frame-direction connection symbols g(nabla_{e_l} e_s, e_t)."""
    return [
        [
            [ctx.geo_christoffel_frame(l, s, t).jet() for t in ctx.range1]
            for s in ctx.range1
        ]
        for l in ctx.range1
    ]


# ---------------------------------------------------------------------------
# Pullbacks and the convergence trichotomy
# ---------------------------------------------------------------------------

class PullbackResult:
    """Graded jets of a geometric polynomial under the contraction family.

    ``pullback`` grades the plain substitution ``x -> lambda x``;
    ``for_scaled_metric`` carries the extra weight equal to the Gilkey order,
    which by the transport lemma is the jet of the same polynomial built for
    the dilated metric.
    """

    __slots__ = ("pullback", "for_scaled_metric", "gilkey_order")

    def __init__(self, pullback, for_scaled_metric, gilkey_order):
        self.pullback = pullback
        self.for_scaled_metric = for_scaled_metric
        self.gilkey_order = gilkey_order


def pullback_flambda(poly: GeometricPolynomial) -> PullbackResult:
    jet = poly.jet()
    order = poly.gilkey_order() or 0
    return PullbackResult(
        pullback=lambda_substitute(jet, 0),
        for_scaled_metric=lambda_substitute(jet, order),
        gilkey_order=order,
    )


class LimitVerdict:
    __slots__ = ("kind", "value", "grading")

    def __init__(self, kind, value=None, grading=None):
        self.kind = kind  # diverges | zero | finite | indeterminate
        self.value = value
        self.grading = grading

    def __repr__(self):
        if self.kind == "finite":
            return f"LimitVerdict(finite, {self.value})"
        return f"LimitVerdict({self.kind})"


def valuation_limit(h: PolyExpr, gamma, theta: int) -> LimitVerdict:
    """Behaviour of ``lambda^{-theta} D^gamma (h o f_lambda)`` as the scale
    parameter vanishes, decided through the formal grading."""
    d = h
    for i in gamma:
        d = d.derivative(i)
    graded = lambda_substitute(d, len(gamma) - theta)
    lo = graded.min_degree()
    if lo is not None and lo < 0:
        return LimitVerdict("diverges", grading=graded)
    if d.trunc is not None:
        tail_degree = d.trunc + 1 + len(gamma) - theta
        if tail_degree < 0:
            return LimitVerdict("indeterminate", grading=graded)
        if tail_degree == 0 and lo is None:
            # the limit would be the first unknown coefficient
            return LimitVerdict("indeterminate", grading=graded)
    at_zero = graded.component(0)
    if at_zero is None or at_zero.is_zero():
        return LimitVerdict("zero", value=PolyExpr.zero(h.n), grading=graded)
    return LimitVerdict("finite", value=at_zero, grading=graded)
