"""Pointwise polyhomogeneous symbol calculus for Laplace-type operators.

The pipeline: operator -> symbol (polynomial in the covariable) -> resolvent
components in the algebra generated by the covariable and the formal inverse
``rhat = (|xi|^2 - mu)^{-1}`` -> complex-power components via closed-form
contour coefficients -> logarithm components -> residue densities by exact
integration of monomials over the unit sphere.

Conventions fixed here and pinned by numeric oracles:

* symbols use the phase giving ``sigma(D^gamma) = (i xi)^gamma``;
* the spectral cut sits on the negative real axis with the principal branch
  ``arg in (-pi, pi)``, and the contour winds positively around the positive
  spectrum, forcing the power coefficients ``C(z,k) = (-1)^{k+1} binom(z,k-1)``
  with ``C(z,1) = 1``;
* densities carry the ``(2 pi)^{-n}`` normalization and are exact rationals
  times a power of pi.

Coefficients may be scalar jets, matrices over the form basis, or Clifford
elements; the recursions only require the leading symbol to be a scalar
multiple of the identity (Laplace type), with an optional scalar
positive-valuation correction coming from the metric jets.
"""

from __future__ import annotations

import cmath
from fractions import Fraction

from .algebra import LambdaGraded, PolyExpr, Scalar, lambda_substitute
from .clifford import (
    CliffordElement,
    EndoMatrix,
    FormElement,
    all_subsets,
    clifford_map,
    supertrace,
)

__all__ = [
    "HomogTerm",
    "PhgSymbol",
    "ResolventSymbol",
    "DensityValue",
    "operator_symbol",
    "limit_operator_symbol",
    "star_product",
    "resolvent_symbol",
    "contour_power_coefficient",
    "contour_power_derivative_at_zero",
    "contour_power_quadrature",
    "power_components",
    "log_symbol_component",
    "log_symbol",
    "sphere_monomial_integral",
    "sphere_integrate",
    "residue_density",
    "pullback_symbol",
    "getzler_symbol_conjugate",
    "localization_check",
]


# ---------------------------------------------------------------------------
# Coefficient-ring helpers (scalar jets, matrices, Clifford elements)
# ---------------------------------------------------------------------------

def _ring_mul(a, b):
    return a * b


def _ring_add(a, b):
    return a + b


def _ring_is_zero(c) -> bool:
    probe = getattr(c, "is_zero", None)
    if probe is not None:
        return probe()
    return c == 0


def _ring_dx(c, i):
    if isinstance(c, PolyExpr):
        return c.derivative(i)
    if isinstance(c, EndoMatrix):
        return c.map_entries(lambda p: _ring_dx(p, i))
    if isinstance(c, CliffordElement):
        return CliffordElement(
            c.n, {w: _ring_dx(p, i) for w, p in c.coeffs.items()}
        )
    if isinstance(c, Scalar):
        return Scalar(0)
    raise TypeError(f"cannot differentiate coefficient {type(c)}")


def _ring_scale(c, s):
    return c * s


def _ring_sub_x(c, factor: Fraction):
    """Substitute x -> factor * x in the coefficient."""
    if isinstance(c, PolyExpr):
        out = {}
        for (deg, curv), coeff in c.terms.items():
            out[(deg, curv)] = coeff * (Scalar(factor) ** sum(deg))
        return PolyExpr(c.n, out, c.trunc)
    if isinstance(c, EndoMatrix):
        return c.map_entries(lambda p: _ring_sub_x(p, factor))
    if isinstance(c, CliffordElement):
        return CliffordElement(
            c.n, {w: _ring_sub_x(p, factor) for w, p in c.coeffs.items()}
        )
    if isinstance(c, Scalar):
        return c
    raise TypeError(type(c))


def _ring_trunc(c):
    if isinstance(c, PolyExpr):
        return c.trunc
    if isinstance(c, EndoMatrix):
        vals = [p.trunc for p in c.entries.values() if isinstance(p, PolyExpr)]
        vals = [v for v in vals if v is not None]
        return min(vals) if vals else None
    if isinstance(c, CliffordElement):
        vals = [p.trunc for p in c.coeffs.values() if isinstance(p, PolyExpr)]
        vals = [v for v in vals if v is not None]
        return min(vals) if vals else None
    return None


# ---------------------------------------------------------------------------
# Symbol containers
# ---------------------------------------------------------------------------

class HomogTerm:
    """``coeff * xi^alpha * |xi|^norm_power``; degree = |alpha| + norm_power."""

    __slots__ = ("coeff", "alpha", "norm_power")

    def __init__(self, coeff, alpha, norm_power=0):
        self.coeff = coeff
        self.alpha = tuple(alpha)
        self.norm_power = norm_power

    @property
    def degree(self):
        return sum(self.alpha) + self.norm_power

    def __repr__(self):
        return f"HomogTerm({self.coeff!r}, xi^{self.alpha}, |xi|^{self.norm_power})"


class PhgSymbol:
    """Polyhomogeneous symbol: order and components indexed by the drop ``j``.

    ``components[j]`` is a map ``alpha -> coefficient`` of the homogeneous
    part of degree ``order - j`` (polynomial components only; negative-degree
    parts of logarithms are stored as :class:`HomogTerm` lists elsewhere).
    ``log_marker`` is set on logarithm symbols.
    """

    def __init__(self, n, order, components, log_marker=None):
        self.n = n
        self.order = order
        self.components = {
            j: {a: c for a, c in comp.items() if not _ring_is_zero(c)}
            for j, comp in components.items()
        }
        self.components = {j: c for j, c in self.components.items() if c}
        self.log_marker = log_marker

    def component(self, j):
        return self.components.get(j, {})

    def max_depth(self):
        return max(self.components, default=0)

    def map_coeffs(self, fn) -> "PhgSymbol":
        return PhgSymbol(
            self.n, self.order,
            {j: {a: fn(c) for a, c in comp.items()}
             for j, comp in self.components.items()},
            self.log_marker,
        )

    def __repr__(self):
        return f"PhgSymbol(order={self.order}, js={sorted(self.components)})"


def _poly_component_add(comp, alpha, coeff):
    cur = comp.get(alpha)
    coeff = coeff if cur is None else _ring_add(cur, coeff)
    if _ring_is_zero(coeff):
        comp.pop(alpha, None)
    else:
        comp[alpha] = coeff


def operator_symbol(op) -> PhgSymbol:
    """Symbol of a differential operator: ``sigma = sum P_gamma (i xi)^gamma``.

    Scalar coefficients stay jets; forms coefficients become matrices; spinor
    coefficients become Clifford elements with jet coordinates.
    """
    ctx = op.ctx
    n = ctx.n
    components = {}
    for gamma, coeff in op.terms.items():
        alpha = [0] * n
        for i in gamma:
            alpha[i - 1] += 1
        alpha = tuple(alpha)
        phase = Scalar.i() ** len(gamma)
        j = op.order - len(gamma)
        comp = components.setdefault(j, {})
        if op.bundle == "scalar":
            carrier = coeff[()].jet() * phase
        elif op.bundle == "forms":
            carrier = EndoMatrix(
                n, {k: p.jet() * phase for k, p in coeff.items()}
            )
        else:
            carrier = CliffordElement(
                n, {w: p.jet() * phase for w, p in coeff.items()}
            )
        _poly_component_add(comp, alpha, carrier)
    return PhgSymbol(n, op.order, components)


def limit_operator_symbol(lim) -> PhgSymbol:
    """Symbol of a limit operator (plain polynomial coefficients)."""
    n = lim.ctx.n
    components = {}
    order = max((len(g) for g in lim.terms), default=0)
    for gamma, coeff in lim.terms.items():
        alpha = [0] * n
        for i in gamma:
            alpha[i - 1] += 1
        alpha = tuple(alpha)
        phase = Scalar.i() ** len(gamma)
        j = order - len(gamma)
        comp = components.setdefault(j, {})
        if lim.bundle == "scalar":
            carrier = coeff[()] * phase
        else:
            carrier = EndoMatrix(n, {k: p * phase for k, p in coeff.items()})
        _poly_component_add(comp, alpha, carrier)
    return PhgSymbol(n, order, components)


# ---------------------------------------------------------------------------
# Star product of polynomial symbols
# ---------------------------------------------------------------------------

def _alpha_iter(n, total):
    if n == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _alpha_iter(n - 1, total - head):
            yield (head,) + rest


def _factorial(k):
    out = 1
    for v in range(2, k + 1):
        out *= v
    return out


def _alpha_factorial(alpha):
    out = 1
    for a in alpha:
        out *= _factorial(a)
    return out


def _xi_derivative(comp, direction):
    out = {}
    for alpha, coeff in comp.items():
        e = alpha[direction]
        if e == 0:
            continue
        new = alpha[:direction] + (e - 1,) + alpha[direction + 1:]
        _poly_component_add(out, new, _ring_scale(coeff, e))
    return out


def _x_derivative(comp, i):
    out = {}
    for alpha, coeff in comp.items():
        d = _ring_dx(coeff, i)
        if not _ring_is_zero(d):
            _poly_component_add(out, alpha, d)
    return out


def star_product(a: PhgSymbol, b: PhgSymbol, depth: int) -> PhgSymbol:
    """Composition asymptotics of two polynomial symbols, exact through depth.

    For differential operators the expansion terminates and reproduces the
    symbol of the composition.
    """
    n = a.n
    max_a = a.max_depth()
    max_b = b.max_depth()
    components = {}
    for j in range(depth + 1):
        comp = {}
        for ja in range(0, min(j, max_a) + 1):
            ca = a.component(ja)
            if not ca:
                continue
            for jb in range(0, min(j - ja, max_b) + 1):
                k = j - ja - jb
                cb = b.component(jb)
                if not cb:
                    continue
                for alpha in _alpha_iter(n, k):
                    da = ca
                    for direction, reps in enumerate(alpha):
                        for _ in range(reps):
                            da = _xi_derivative(da, direction)
                    if not da:
                        continue
                    db = cb
                    for direction, reps in enumerate(alpha):
                        for _ in range(reps):
                            db = _x_derivative(db, direction + 1)
                    if not db:
                        continue
                    scale = Scalar(Fraction(1, _alpha_factorial(alpha)))
                    scale = scale * (Scalar(0, -1) ** k)
                    for aa, coeff_a in da.items():
                        for ab, coeff_b in db.items():
                            merged = tuple(x + y for x, y in zip(aa, ab))
                            _poly_component_add(
                                comp, merged,
                                _ring_mul(coeff_a, coeff_b) * scale,
                            )
        if comp:
            components[j] = comp
    return PhgSymbol(n, a.order + b.order, components)


# ---------------------------------------------------------------------------
# Resolvent components
# ---------------------------------------------------------------------------

class ResolventSymbol:
    """Components ``b_j``: maps ``(alpha, k) -> coeff`` for terms
    ``coeff * xi^alpha * rhat^k``; each ``b_j`` is homogeneous of degree
    ``-2-j`` under ``(xi, mu) -> (t xi, t^2 mu)``."""

    def __init__(self, n, components):
        self.n = n
        self.components = components

    def component(self, j):
        return self.components.get(j, {})

    def depth(self):
        return max(self.components, default=0)


def _rcomp_add(comp, key, coeff):
    cur = comp.get(key)
    coeff = coeff if cur is None else _ring_add(cur, coeff)
    if _ring_is_zero(coeff):
        comp.pop(key, None)
    else:
        comp[key] = coeff


def _rcomp_scale_ring(comp, c, right=True):
    out = {}
    for key, coeff in comp.items():
        val = _ring_mul(coeff, c) if right else _ring_mul(c, coeff)
        if not _ring_is_zero(val):
            out[key] = val
    return out


def _rcomp_xi_derivative(comp, direction):
    out = {}
    for (alpha, k), coeff in comp.items():
        e = alpha[direction]
        if e:
            new = alpha[:direction] + (e - 1,) + alpha[direction + 1:]
            _rcomp_add(out, (new, k), _ring_scale(coeff, e))
        # d/dxi rhat^k = -2 k xi rhat^{k+1}
        bumped = list(alpha)
        bumped[direction] += 1
        _rcomp_add(out, (tuple(bumped), k + 1), _ring_scale(coeff, -2 * k))
    return out


def _rcomp_x_derivative(comp, i):
    out = {}
    for key, coeff in comp.items():
        d = _ring_dx(coeff, i)
        if not _ring_is_zero(d):
            _rcomp_add(out, key, d)
    return out


def _rcomp_mul_poly(comp, poly_comp):
    """Multiply (on the right) by a polynomial symbol component."""
    out = {}
    for (alpha, k), coeff in comp.items():
        for beta, c2 in poly_comp.items():
            merged = tuple(x + y for x, y in zip(alpha, beta))
            _rcomp_add(out, (merged, k), _ring_mul(coeff, c2))
    return out


def _rcomp_mul_rcomp(a, b):
    out = {}
    for (alpha, k), ca in a.items():
        for (beta, l), cb in b.items():
            merged = tuple(x + y for x, y in zip(alpha, beta))
            _rcomp_add(out, (merged, k + l), _ring_mul(ca, cb))
    return out


def _ring_constant_part(coeff, n):
    if isinstance(coeff, PolyExpr):
        return coeff.constant_term()
    if isinstance(coeff, EndoMatrix):
        return coeff.map_entries(lambda p: _ring_constant_part(p, n))
    if isinstance(coeff, CliffordElement):
        return CliffordElement(
            coeff.n,
            {w: _ring_constant_part(p, n) for w, p in coeff.coeffs.items()},
        )
    return coeff


def _ring_min_degree(coeff):
    if isinstance(coeff, PolyExpr):
        return coeff._min_degree()
    if isinstance(coeff, EndoMatrix):
        vals = [_ring_min_degree(p) for p in coeff.entries.values()]
    elif isinstance(coeff, CliffordElement):
        vals = [_ring_min_degree(p) for p in coeff.coeffs.values()]
    else:
        return 0
    vals = [v for v in vals if v is not None]
    return min(vals) if vals else None


def _scalar_leading_split(sym: PhgSymbol):
    """Split the leading symbol as ``|xi|^2 Id + h`` where h has positive
    coordinate valuation (it vanishes at the base point); anything whose value
    at the base point is not ``|xi|^2 Id`` is rejected as non-Laplace-type."""
    n = sym.n
    lead = sym.component(0)
    h_comp = {}
    for alpha, coeff in lead.items():
        is_square = sum(alpha) == 2 and max(alpha) == 2
        const = _ring_constant_part(coeff, n)
        if is_square:
            ident = _identity_like(coeff, n)
            defect = _ring_add(const, _ring_scale(ident, Scalar(-1)))
            if not _ring_is_zero(defect):
                raise ValueError("leading symbol must equal |xi|^2 Id at the base point")
            rest = _ring_add(coeff, _ring_scale(ident, Scalar(-1)))
        else:
            if not _ring_is_zero(const):
                raise ValueError("leading symbol must equal |xi|^2 Id at the base point")
            rest = coeff
        if not _ring_is_zero(rest):
            h_comp[alpha] = rest
    for i in range(n):
        alpha = tuple(2 if a == i else 0 for a in range(n))
        if alpha not in lead:
            raise ValueError("leading symbol must contain every xi_i^2")
    return h_comp


def resolvent_symbol(sym: PhgSymbol, depth: int) -> ResolventSymbol:
    """Left resolvent components from ``b * (sigma - mu) = Id``."""
    if sym.order != 2:
        raise ValueError("resolvent recursion implemented for order two")
    n = sym.n
    h = _scalar_leading_split(sym)

    # b0 = sum_m (-1)^m h^m rhat^{m+1}, truncated by the valuation of h
    sample = next(iter(sym.component(0).values()))
    ident = _identity_like(sample, n)
    b0 = {((0,) * n, 1): ident}
    if h:
        max_pow = _h_power_bound(h, n)
        power = {((0,) * n, 0): ident}
        sign = 1
        for m in range(1, max_pow + 1):
            sign = -sign
            power = _rcomp_mul_poly(power, h)
            if not power:
                break
            # (-1)^m h^m rhat^{m+1}
            for (alpha, _zero), coeff in power.items():
                _rcomp_add(b0, (alpha, m + 1), coeff * Scalar(sign))

    components = {0: b0}
    for j in range(1, depth + 1):
        acc = {}
        for k in range(j):
            bk = components.get(k, {})
            if not bk:
                continue
            for total in range(0, j - k + 1):
                for alpha in _alpha_iter(n, total):
                    l = j - k - total
                    if l < 0 or l > 2:
                        continue
                    if l == 0 and total == 0:
                        continue  # the b_j (a2 - mu) term itself
                    if l == 0:
                        target = h
                    else:
                        target = sym.component(l)
                    if not target:
                        continue
                    da = bk
                    for direction, reps in enumerate(alpha):
                        for _ in range(reps):
                            da = _rcomp_xi_derivative(da, direction)
                    if not da:
                        continue
                    db = target
                    for direction, reps in enumerate(alpha):
                        for _ in range(reps):
                            db = _x_derivative(db, direction + 1)
                    if not db:
                        continue
                    scale = Scalar(Fraction(1, _alpha_factorial(alpha))) * (
                        Scalar(0, -1) ** total
                    )
                    prod = _rcomp_mul_poly(da, db)
                    for key, coeff in prod.items():
                        _rcomp_add(acc, key, coeff * scale)
        bj = {}
        for (alpha, k), coeff in acc.items():
            for (beta, l), c0 in b0.items():
                merged = tuple(x + y for x, y in zip(alpha, beta))
                _rcomp_add(bj, (merged, k + l), -_ring_mul(coeff, c0))
        components[j] = bj
        _assert_resolvent_homogeneity(bj, j)
    return ResolventSymbol(n, components)


def _identity_like(sample, n):
    if isinstance(sample, EndoMatrix):
        return EndoMatrix.identity(n)
    if isinstance(sample, CliffordElement):
        return CliffordElement.unit(n)
    return PolyExpr.constant(n, 1)


def _h_power_bound(h, n):
    vals = []
    for coeff in h.values():
        v = _ring_min_degree(coeff)
        vals.append(v if v is not None else 1)
    vmin = max(min(vals), 1)
    caps = [t for t in (_ring_trunc(c) for c in h.values()) if t is not None]
    cap = max(caps, default=3)
    return cap // vmin + 1


def _assert_resolvent_homogeneity(comp, j):
    for (alpha, k), _ in comp.items():
        if sum(alpha) - 2 * k != -2 - j:
            raise AssertionError(
                f"resolvent homogeneity violated at j={j}: alpha={alpha}, k={k}"
            )


def resolvent_identity_defect(sym: PhgSymbol, res: ResolventSymbol, depth: int,
                              side: str = "left"):
    """Components of ``b * (sigma - mu) - Id`` (or ``(sigma - mu) * b - Id``)
    in the rhat algebra, eliminating mu via ``mu = |xi|^2 - rhat^{-1}``.

    All components must vanish identically for the recursion to be a genuine
    two-sided parametrix through the requested depth.
    """
    n = sym.n
    defects = {}
    for j in range(depth + 1):
        acc = {}
        for k in range(0, j + 1):
            bk = res.component(k)
            if not bk:
                continue
            # -mu * b_k = -|xi|^2 b_k + rhat^{-1} b_k, at the (l=0, alpha=0) slot
            if k == j:
                sq = {tuple(2 if a == i else 0 for a in range(n)): Scalar(-1)
                      for i in range(n)}
                for key, coeff in _rcomp_mul_poly(bk, sq).items():
                    _rcomp_add(acc, key, coeff)
                for (a2, kk), coeff in bk.items():
                    _rcomp_add(acc, (a2, kk - 1), coeff)
            for total in range(0, j - k + 1):
                l = j - k - total
                if l < 0 or l > 2:
                    continue
                target = sym.component(l)
                if not target:
                    continue
                scale = Scalar(Fraction(1, 1)) * (Scalar(0, -1) ** total)
                for alpha in _alpha_iter(n, total):
                    factor = scale * Scalar(Fraction(1, _alpha_factorial(alpha)))
                    if side == "left":
                        da = bk
                        for direction, reps in enumerate(alpha):
                            for _ in range(reps):
                                da = _rcomp_xi_derivative(da, direction)
                        if not da:
                            continue
                        db = target
                        for direction, reps in enumerate(alpha):
                            for _ in range(reps):
                                db = _x_derivative(db, direction + 1)
                        if not db:
                            continue
                        for key, coeff in _rcomp_mul_poly(da, db).items():
                            _rcomp_add(acc, key, coeff * factor)
                    else:
                        da = target
                        for direction, reps in enumerate(alpha):
                            for _ in range(reps):
                                da = _xi_derivative(da, direction)
                        if not da:
                            continue
                        db = bk
                        for direction, reps in enumerate(alpha):
                            for _ in range(reps):
                                db = _rcomp_x_derivative(db, direction + 1)
                        if not db:
                            continue
                        prod = {}
                        for beta, c2 in da.items():
                            for (alpha_b, kk), cb in db.items():
                                merged = tuple(
                                    x + y for x, y in zip(beta, alpha_b)
                                )
                                _rcomp_add(prod, (merged, kk), _ring_mul(c2, cb))
                        for key, coeff in prod.items():
                            _rcomp_add(acc, key, coeff * factor)
        if j == 0:
            sample = next(iter(res.component(0).values()))
            _rcomp_add(acc, ((0,) * n, 0), -_identity_like(sample, n))
        defects[j] = acc
    return defects


# ---------------------------------------------------------------------------
# Contour coefficients
# ---------------------------------------------------------------------------

def contour_power_coefficient(k: int):
    """Exact polynomial coefficients of ``C(z,k) = (-1)^{k+1} binom(z, k-1)``,
    returned as the list of rational coefficients of 1, z, z^2, ...

    ``C(z,k)`` multiplies ``r^{z-k+1}`` in the contour integral of
    ``(r - mu)^{-k}`` against ``mu^z``; ``C(z,1) = 1`` pins the orientation.
    """
    if k < 1:
        raise ValueError("rhat exponent must be at least 1")
    # binom(z, k-1) = z (z-1) ... (z-k+2) / (k-1)!
    coeffs = [Fraction(1)]
    for m in range(k - 1):
        # multiply polynomial by (z - m)
        new = [Fraction(0)] * (len(coeffs) + 1)
        for p, c in enumerate(coeffs):
            new[p + 1] += c
            new[p] -= c * m
        coeffs = new
    fact = _factorial(k - 1)
    sign = (-1) ** (k + 1)
    return [c * sign / fact for c in coeffs]


def contour_power_eval(k: int, z) -> complex:
    out = 0
    for p, c in enumerate(contour_power_coefficient(k)):
        out += complex(c) * z ** p
    return out


def contour_power_eval_exact(k: int, z: Fraction) -> Fraction:
    out = Fraction(0)
    for p, c in enumerate(contour_power_coefficient(k)):
        out += c * z ** p
    return out


def contour_power_derivative_at_zero(k: int) -> Fraction:
    """d/dz C(z,k) at z = 0: zero for k=1, else -1/(k-1)."""
    coeffs = contour_power_coefficient(k)
    return coeffs[1] if len(coeffs) > 1 else Fraction(0)


def contour_power_quadrature(r: float, z: complex, k: int,
                             orientation: int = +1) -> complex:
    """Numeric keyhole evaluation of ``(i/2pi) int mu^z (r-mu)^{-k} dmu``
    along the two edges of the negative-axis cut, principal branch.

    ``orientation=+1`` runs the upper edge inward and the lower edge outward,
    which winds positively around the positive spectrum.  Valid for
    ``-1 < Re(z) < k - 1``.
    """
    import mpmath

    if not (-1 < z.real < k - 1):
        raise ValueError("quadrature needs -1 < Re z < k-1 for convergence")
    with mpmath.workdps(40):
        mz = mpmath.mpc(z)

        def edge(t, branch):
            # edge point mu = -s with s = r t/(1-t); ds = r/(1-t)^2 dt
            s = r * t / (1 - t)
            return (
                mpmath.power(s, mz)
                * mpmath.e ** (branch * 1j * mpmath.pi * mz)
                / mpmath.power(r + s, k)
                * r / (1 - t) ** 2
            )

        upper = mpmath.quad(lambda t: edge(t, +1), [0, 1], maxdegree=10)
        lower = mpmath.quad(lambda t: edge(t, -1), [0, 1], maxdegree=10)
        total = (1j / (2 * mpmath.pi)) * (upper - lower) * orientation
        return complex(total)


# ---------------------------------------------------------------------------
# Complex powers and logarithms
# ---------------------------------------------------------------------------

class PowerComponents:
    """``sigma_{2z-j}(P^z) = sum coeff * xi^alpha * C(z,k) |xi|^{2z-2k+2}``,
    stored per ``j`` as ``(alpha, k) -> coeff``."""

    def __init__(self, n, components):
        self.n = n
        self.components = components

    def component(self, j):
        return self.components.get(j, {})

    def eval_component(self, j, z: Fraction):
        """Collapse C(z,k) at an exact rational z; the |xi| exponent of each
        surviving term is 2z - 2k + 2 recorded alongside."""
        out = {}
        for (alpha, k), coeff in self.component(j).items():
            c = contour_power_eval_exact(k, z)
            if c == 0:
                continue
            key = (alpha, k)
            out[key] = _ring_scale(coeff, Scalar(c))
        return out


def power_components(res: ResolventSymbol) -> PowerComponents:
    comps = {}
    for j, comp in res.components.items():
        slot = {}
        for (alpha, k), coeff in comp.items():
            if k < 1:
                raise AssertionError("resolvent term with nonpositive rhat power")
            slot[(alpha, k)] = coeff
        comps[j] = slot
    return PowerComponents(res.n, comps)


def log_symbol_component(res: ResolventSymbol, j: int):
    """Degree ``-j`` homogeneous component of the logarithm, as HomogTerms."""
    terms = []
    for (alpha, k), coeff in res.component(j).items():
        slope = contour_power_derivative_at_zero(k)
        if slope == 0:
            if j > 0 and k == 1:
                raise AssertionError("unexpected rhat^1 term beyond the top component")
            continue
        terms.append(
            HomogTerm(_ring_scale(coeff, Scalar(slope)), alpha,
                      -j - sum(alpha))
        )
    return terms


class LogSymbol:
    """Logarithm symbol: marker ``order * log|xi| Id`` plus homogeneous
    components of nonpositive degree."""

    def __init__(self, n, order, components):
        self.n = n
        self.order = order
        self.log_marker = order
        self.components = components  # j -> list[HomogTerm]

    def component(self, j):
        return self.components.get(j, [])


def log_symbol(sym: PhgSymbol, depth: int) -> LogSymbol:
    res = resolvent_symbol(sym, depth)
    top = res.component(0)
    comps = {}
    for j in range(0, depth + 1):
        terms = log_symbol_component(res, j)
        if terms:
            comps[j] = terms
    # sanity: the k=1 part of b_0 must be the identity, so that the log marker
    # is exactly (order) * log|xi| * Id
    ident_term = top.get(((0,) * sym.n, 1))
    if ident_term is None:
        raise AssertionError("resolvent top component lost its identity term")
    return LogSymbol(sym.n, sym.order, comps)


# ---------------------------------------------------------------------------
# Exact sphere integration and densities
# ---------------------------------------------------------------------------

def _gamma_half(p: int):
    """Gamma(p/2) for positive integer p as (rational, power of sqrt(pi))."""
    if p <= 0:
        raise ValueError("argument must be positive")
    if p % 2 == 0:
        return Fraction(_factorial(p // 2 - 1)), 0
    # Gamma(m + 1/2) = (2m)! / (4^m m!) sqrt(pi) with m = (p-1)//2
    m = (p - 1) // 2
    return Fraction(_factorial(2 * m), 4 ** m * _factorial(m)), 1


def sphere_monomial_integral(alpha):
    """``int_{S^{n-1}} xi^alpha dS``: exact rational times pi^{n/2} when all
    exponents are even, zero otherwise."""
    n = len(alpha)
    if any(a % 2 for a in alpha):
        return Fraction(0), Fraction(0)
    num = Fraction(2)
    half_pis = 0
    for a in alpha:
        q, s = _gamma_half(a + 1)
        num *= q
        half_pis += s
    q, s = _gamma_half(n + sum(alpha))
    num /= q
    half_pis -= s
    return num, Fraction(half_pis, 2)


class DensityValue:
    """Exact density: coefficient (scalar or jet) times a power of pi."""

    def __init__(self, coeff, pi_power: Fraction, form_label="Res",
                 trace_mode="tr"):
        self.coeff = coeff
        self.pi_power = Fraction(pi_power)
        self.form_label = form_label
        self.trace_mode = trace_mode

    def is_zero(self):
        return _ring_is_zero(self.coeff)

    def constant_value(self) -> Scalar:
        if isinstance(self.coeff, PolyExpr):
            const = self.coeff.constant_term()
            if not (self.coeff - const).is_zero():
                raise ValueError("density is x-dependent; no constant value")
            return const.coefficient((0,) * self.coeff.n)
        return Scalar.of(self.coeff)

    def float_value(self) -> complex:
        import math

        val = self.constant_value().to_complex()
        return val * math.pi ** float(self.pi_power)

    def exact_str(self) -> str:
        coeff = (
            str(self.coeff) if not isinstance(self.coeff, PolyExpr)
            else str(self.coeff)
        )
        if self.pi_power == 0:
            return coeff
        p = self.pi_power
        pstr = "pi" if p == 1 else f"pi^{p}"
        return f"({coeff}) * {pstr}"

    def scaled(self, s) -> "DensityValue":
        return DensityValue(_ring_scale(self.coeff, s), self.pi_power,
                            self.form_label, self.trace_mode)

    def __repr__(self):
        return f"DensityValue({self.exact_str()}, mode={self.trace_mode})"


def sphere_integrate(term: HomogTerm, n: int) -> DensityValue:
    """Integrate one homogeneous term over the unit sphere (where the norm
    factor is 1), keeping the coefficient exact."""
    q, ppow = sphere_monomial_integral(term.alpha + (0,) * (n - len(term.alpha)))
    if q == 0:
        return DensityValue(Scalar(0), 0)
    return DensityValue(_ring_scale(term.coeff, Scalar(q)), ppow)


def _trace_reduce(coeff, mode, n, rep=None, jg=None):
    if mode == "tr":
        if isinstance(coeff, EndoMatrix):
            return coeff.trace()
        if isinstance(coeff, CliffordElement):
            raise ValueError("plain trace of a Clifford coefficient needs c^g first")
        return coeff
    if mode == "str":
        if not isinstance(coeff, CliffordElement):
            raise ValueError("supertrace mode needs Clifford-valued coefficients")
        if rep is None:
            raise ValueError("supertrace mode needs a spinor representation")
        out = None
        for word, p in coeff.coeffs.items():
            s = supertrace(CliffordElement.word(n, word), rep)
            add = p * s
            out = add if out is None else out + add
        return out if out is not None else PolyExpr.zero(n)
    if mode == "berezin":
        if isinstance(coeff, CliffordElement):
            mat = _clifford_to_endo(coeff, n)
        elif isinstance(coeff, EndoMatrix):
            mat = coeff
        else:
            raise ValueError("berezin mode needs endomorphism-valued coefficients")
        top = tuple(range(1, n + 1))
        val = mat.entries.get((top, ()), PolyExpr.zero(n))
        if jg is not None:
            val = jg * val
        return val
    raise ValueError(f"unknown trace mode {mode!r}")


def _clifford_to_endo(coeff, n):
    out = EndoMatrix.zero(n)
    for word, p in coeff.coeffs.items():
        out = out + clifford_map(CliffordElement.word(n, word)).scale(p)
    return out


def residue_density(minus_n_terms, n, trace_mode="tr", rep=None, jg=None,
                    form_label="Res") -> DensityValue:
    """``(2 pi)^{-n}`` times the sphere integral of the traced degree ``-n``
    component, exact."""
    total = None
    total_pi = None
    for term in minus_n_terms:
        if term.degree != -n:
            raise ValueError("component is not homogeneous of degree -n")
        reduced = _trace_reduce(term.coeff, trace_mode, n, rep=rep, jg=jg)
        piece = sphere_integrate(HomogTerm(reduced, term.alpha), n)
        if piece.is_zero():
            continue
        if total is None:
            total, total_pi = piece.coeff, piece.pi_power
        else:
            if piece.pi_power != total_pi:
                raise AssertionError("mixed pi powers in one density")
            total = _ring_add(total, piece.coeff)
    if total is None:
        return DensityValue(Scalar(0), 0, form_label, trace_mode)
    coeff = _ring_scale(total, Scalar(Fraction(1, 2 ** n)))
    return DensityValue(coeff, total_pi - n, form_label, trace_mode)


# ---------------------------------------------------------------------------
# Contractions and degree conjugation of symbols
# ---------------------------------------------------------------------------

def pullback_symbol(sym: PhgSymbol, lam=None):
    """Pullback under the contraction: coefficients at ``lambda x``, covector
    scaled by ``lambda^{-1}``.

    With ``lam=None`` the result is the formal grading: the component of
    homogeneity ``a`` with coordinate degree ``d`` sits at weight ``d - a``.
    With an exact rational ``lam`` the substituted symbol is returned.
    """
    if lam is not None:
        lam = Fraction(lam)
        components = {}
        for j, comp in sym.components.items():
            a = sym.order - j
            factor = Scalar(Fraction(1) / lam ** a)  # lambda^{-a}
            slot = {}
            for alpha, coeff in comp.items():
                slot[alpha] = _ring_scale(_ring_sub_x(coeff, lam), factor)
            components[j] = slot
        return PhgSymbol(sym.n, sym.order, components, sym.log_marker)
    graded = {}
    for j, comp in sym.components.items():
        a = sym.order - j
        for alpha, coeff in comp.items():
            poly = coeff if isinstance(coeff, PolyExpr) else None
            if poly is None:
                raise ValueError("formal grading implemented for scalar jets")
            g = lambda_substitute(poly, -a)
            for deg, part in g.components.items():
                graded.setdefault(deg, {}).setdefault(j, {})[alpha] = part
    return {
        deg: PhgSymbol(sym.n, sym.order, comps) for deg, comps in graded.items()
    }


def getzler_symbol_conjugate(sym: PhgSymbol, lam: Fraction) -> PhgSymbol:
    """Conjugate an endomorphism-valued symbol by the degree rescaling at an
    exact value of the parameter: entry (row, col) scales by
    ``lam^{|col| - |row|}``."""
    lam = Fraction(lam)
    components = {}
    for j, comp in sym.components.items():
        slot = {}
        for alpha, coeff in comp.items():
            if not isinstance(coeff, EndoMatrix):
                raise ValueError("degree conjugation needs matrix coefficients")
            entries = {}
            for (row, col), p in coeff.entries.items():
                w = len(col) - len(row)
                factor = Scalar(lam ** w)
                entries[(row, col)] = p * factor
            slot[alpha] = EndoMatrix(coeff.dim, entries)
        components[j] = slot
    return PhgSymbol(sym.n, sym.order, components, sym.log_marker)


# ---------------------------------------------------------------------------
# Localization reports
# ---------------------------------------------------------------------------

def localization_check(variant: str, ctx, depth=None, potential=Fraction(1),
                       rep=None):
    """Evaluate both sides of one of the localisation statements and report
    the values together with the scale-factor ledger.

    ``scalar_2_7`` makes no assertion: the report records the Jacobian factor
    that the covariance chain inserts between the two sides.
    """
    from .jets import JetContext
    from .operators import build_named, limit_operator, rescalability

    n = ctx.n
    if depth is None:
        depth = n + 2

    if variant == "scalar_2_7":
        # P = -Laplacian + V at a point, V constant for the desk evaluation
        components = {0: {}, 2: {}}
        for i in range(n):
            alpha = tuple(2 if a == i else 0 for a in range(n))
            components[0][alpha] = PolyExpr.constant(n, 1)
        components[2][(0,) * n] = PolyExpr.constant(n, Scalar(Fraction(potential)))
        sym = PhgSymbol(n, 2, components)
        left = residue_density(
            log_symbol(sym, depth).component(n), n, trace_mode="tr"
        )
        # frozen operator keeps only the top order: the flat Laplacian
        frozen = PhgSymbol(n, 2, {0: components[0]})
        right = residue_density(
            log_symbol(frozen, depth).component(n), n, trace_mode="tr"
        )
        return {
            "variant": variant,
            "left": left.exact_str(),
            "right": right.exact_str(),
            "agrees": left.exact_str() == right.exact_str(),
            "asserted": False,
            "lambda_ledger": {
                "covariance": "density(f^# Q)(x) = lambda^n density(Q)(f x)",
                "jacobian_power": n,
                "note": (
                    "the scalar localisation reads the two sides without the "
                    "lambda^n Jacobian carried by the scalar density; the "
                    "rescaled family therefore converges to zero times the "
                    "left side, which the report records instead of asserting"
                ),
            },
        }

    if variant == "forms_6_5":
        lap = build_named(ctx, "hodge_laplacian")
        report = rescalability(lap)
        lim = report.limit
        left_sym = operator_symbol(lap)
        left = residue_density(
            log_symbol(left_sym, depth).component(n), n, trace_mode="berezin",
            jg=ctx.metric.j_g,
        )
        right_sym = limit_operator_symbol(lim)
        right = residue_density(
            log_symbol(right_sym, depth).component(n), n, trace_mode="berezin",
        )
        left_at_p = _eval_at_origin(left)
        right_const = _eval_at_origin(right)
        return {
            "variant": variant,
            "left_at_p": left_at_p.exact_str(),
            "right": right_const.exact_str(),
            "agrees": left_at_p.exact_str() == right_const.exact_str(),
            "asserted": ctx.curvature == "flat",
            "lambda_ledger": {
                "berezin_weight": -n,
                "jacobian_power": n,
                "note": "the degree-conjugation weight lambda^{-n} cancels the Jacobian",
            },
        }

    if variant == "spinors_6_8":
        d2 = build_named(ctx, "dirac_squared_lichnerowicz")
        report = rescalability(d2)
        lim = report.limit
        right_sym = operator_symbol(d2)
        sres = residue_density(
            log_symbol(right_sym, depth).component(n), n, trace_mode="str",
            rep=rep,
        )
        factor = (Scalar(0, -2) ** (n // 2)).inverse()
        right = _eval_at_origin(sres).scaled(factor)
        left_sym = limit_operator_symbol(lim)
        left = residue_density(
            log_symbol(left_sym, depth).component(n), n, trace_mode="berezin",
        )
        left = _eval_at_origin(left)
        return {
            "variant": variant,
            "left": left.exact_str(),
            "right": right.exact_str(),
            "agrees": left.exact_str() == right.exact_str(),
            "asserted": ctx.curvature == "flat",
            "lambda_ledger": {
                "supertrace_factor": "(-2i)^{-n/2}",
                "berezin_weight": -n,
                "jacobian_power": n,
            },
        }

    raise ValueError(f"unknown localization variant {variant!r}")


def _eval_at_origin(density: DensityValue) -> DensityValue:
    coeff = density.coeff
    if isinstance(coeff, PolyExpr):
        coeff = coeff.constant_term()
    return DensityValue(coeff, density.pi_power, density.form_label,
                        density.trace_mode)
