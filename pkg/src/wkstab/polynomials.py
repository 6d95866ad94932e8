"""Exact polynomial arithmetic.

Multivariate polynomials over Fraction (dict of exponent tuples) power the
symbolic weight class; univariate coefficient-list helpers power antiderivatives,
Sturm chains, and root isolation for existence certificates.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .rational import fr


class Polynomial:
    """Multivariate polynomial with Fraction coefficients.

    ``terms`` maps exponent tuples to nonzero coefficients; ``nvars`` is the
    ambient variable count (kept explicit so zero polynomials compose).
    """

    __slots__ = ("nvars", "terms", "_float_cache")

    def __init__(self, nvars, terms=None):
        self.nvars = int(nvars)
        data = {}
        if terms:
            items = terms.items() if isinstance(terms, dict) else terms
            for expo, coeff in items:
                expo = tuple(int(e) for e in expo)
                if len(expo) != self.nvars:
                    raise ValueError("exponent arity mismatch")
                if any(e < 0 for e in expo):
                    raise ValueError("negative exponent in polynomial")
                coeff = fr(coeff)
                if coeff == 0:
                    continue
                data[expo] = data.get(expo, Fraction(0)) + coeff
                if data[expo] == 0:
                    del data[expo]
        self.terms = data
        self._float_cache = None

    # -- constructors ----------------------------------------------------

    @classmethod
    def constant(cls, nvars, c):
        c = fr(c)
        return cls(nvars, {tuple([0] * nvars): c} if c != 0 else {})

    @classmethod
    def variable(cls, i, nvars):
        expo = tuple(1 if j == i else 0 for j in range(nvars))
        return cls(nvars, {expo: Fraction(1)})

    @classmethod
    def affine(cls, b, c):
        b = [fr(x) for x in b]
        n = len(b)
        terms = {tuple([0] * n): fr(c)}
        for i, bi in enumerate(b):
            terms[tuple(1 if j == i else 0 for j in range(n))] = bi
        return cls(n, terms)

    # -- ring operations ---------------------------------------------------

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, Fraction(0)) + c
            if out[e] == 0:
                del out[e]
        return Polynomial(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c = fr(other)
            return Polynomial(
                self.nvars, {e: c * v for e, v in self.terms.items()}
            )
        other = self._coerce(other)
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, Fraction(0)) + c1 * c2
                if out[e] == 0:
                    del out[e]
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, k):
        k = int(k)
        if k < 0:
            raise ValueError("negative power of a polynomial")
        result = Polynomial.constant(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def _coerce(self, other):
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError("variable count mismatch")
            return other
        return Polynomial.constant(self.nvars, fr(other))

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Polynomial.constant(self.nvars, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    # -- calculus -----------------------------------------------------------

    def diff(self, i):
        out = {}
        for e, c in self.terms.items():
            if e[i] == 0:
                continue
            ne = tuple(v - 1 if j == i else v for j, v in enumerate(e))
            out[ne] = out.get(ne, Fraction(0)) + c * e[i]
        return Polynomial(self.nvars, out)

    def eval(self, point):
        """Exact evaluation at a rational point."""
        point = [fr(x) for x in point]
        total = Fraction(0)
        for e, c in self.terms.items():
            v = c
            for xi, ei in zip(point, e):
                if ei:
                    v *= xi**ei
            total += v
        return total

    def eval_float(self, point):
        total = 0.0
        for e, c in self.terms.items():
            v = float(c)
            for xi, ei in zip(point, e):
                if ei:
                    v *= float(xi) ** ei
            total += v
        return total

    def eval_array(self, pts):
        """Vectorized evaluation on an (N, nvars) float array."""
        pts = np.asarray(pts, dtype=float)
        if self._float_cache is None:
            self._float_cache = [(e, float(c)) for e, c in sorted(self.terms.items())]
        out = np.zeros(pts.shape[0])
        for e, c in self._float_cache:
            mono = np.full(pts.shape[0], c)
            for i, ei in enumerate(e):
                if ei == 1:
                    mono = mono * pts[:, i]
                elif ei:
                    mono = mono * pts[:, i] ** ei
            out += mono
        return out

    def compose_affine(self, matrix, point):
        """Substitute x = point + matrix @ t; returns a polynomial in t.

        ``matrix`` is a list of rows (one per original variable), each of
        length m = new variable count; ``point`` has one entry per original
        variable.  All entries rational.
        """
        m = len(matrix[0]) if matrix and matrix[0] is not None else 0
        if self.nvars:
            m = len(matrix[0])
        subs = []
        for i in range(self.nvars):
            terms = {tuple([0] * m): fr(point[i])}
            for j in range(m):
                e = tuple(1 if k == j else 0 for k in range(m))
                terms[e] = terms.get(e, Fraction(0)) + fr(matrix[i][j])
            subs.append(Polynomial(m, terms))
        out = Polynomial.constant(m, 0)
        pow_cache = [dict() for _ in range(self.nvars)]
        for e, c in self.terms.items():
            mono = Polynomial.constant(m, c)
            for i, ei in enumerate(e):
                if ei == 0:
                    continue
                if ei not in pow_cache[i]:
                    pow_cache[i][ei] = subs[i] ** ei
                mono = mono * pow_cache[i][ei]
            out = out + mono
        return out

    # -- structure ----------------------------------------------------------

    def is_zero(self):
        return not self.terms

    def degree(self):
        if not self.terms:
            return -1
        return max(sum(e) for e in self.terms)

    def coeff_l1(self):
        return sum((abs(c) for c in self.terms.values()), Fraction(0))

    def content_and_primitive(self):
        """Positive rational content and the integer-primitive part.

        Sign convention: the lexicographically largest monomial of the
        primitive part has positive coefficient.
        """
        if not self.terms:
            return Fraction(1), self
        num_gcd = 0
        den_lcm = 1
        for c in self.terms.values():
            num_gcd = math.gcd(num_gcd, abs(c.numerator))
            den_lcm = den_lcm * c.denominator // math.gcd(den_lcm, c.denominator)
        content = Fraction(num_gcd, den_lcm)
        lead = max(self.terms)
        if self.terms[lead] < 0:
            content = -content
        prim = Polynomial(
            self.nvars, {e: c / content for e, c in self.terms.items()}
        )
        return content, prim

    def as_univariate(self):
        """Dense coefficient list (low to high) for a 1-variable polynomial."""
        if self.nvars != 1:
            raise ValueError("not univariate")
        if not self.terms:
            return [Fraction(0)]
        deg = max(e[0] for e in self.terms)
        coeffs = [Fraction(0)] * (deg + 1)
        for e, c in self.terms.items():
            coeffs[e[0]] = c
        return coeffs

    @classmethod
    def from_univariate(cls, coeffs):
        return cls(1, {(i,): c for i, c in enumerate(coeffs) if fr(c) != 0})

    def sort_key(self):
        return tuple(sorted(self.terms.items()))

    def __repr__(self):
        if not self.terms:
            return "Polynomial(0)"
        bits = []
        for e, c in sorted(self.terms.items(), reverse=True):
            mono = "*".join(
                f"x{i}^{ei}" if ei > 1 else f"x{i}"
                for i, ei in enumerate(e)
                if ei
            )
            bits.append(f"{c}{'*' + mono if mono else ''}")
        return "Polynomial(" + " + ".join(bits) + ")"


# -- univariate helpers (dense Fraction coefficient lists, low to high) ------


def poly1_trim(p):
    while len(p) > 1 and p[-1] == 0:
        p = p[:-1]
    return list(p)


def poly1_is_zero(p):
    return all(c == 0 for c in p)


def poly1_add(p, q):
    n = max(len(p), len(q))
    return poly1_trim(
        [
            (p[i] if i < len(p) else Fraction(0))
            + (q[i] if i < len(q) else Fraction(0))
            for i in range(n)
        ]
    )


def poly1_scale(c, p):
    c = fr(c)
    return poly1_trim([c * x for x in p])


def poly1_mul(p, q):
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a == 0:
            continue
        for j, b in enumerate(q):
            out[i + j] += a * b
    return poly1_trim(out)


def poly1_diff(p):
    if len(p) <= 1:
        return [Fraction(0)]
    return [Fraction(i) * p[i] for i in range(1, len(p))]


def poly1_antiderivative(p):
    return [Fraction(0)] + [c / (i + 1) for i, c in enumerate(p)]


def poly1_eval(p, x):
    x = fr(x)
    total = Fraction(0)
    for c in reversed(p):
        total = total * x + c
    return total


def poly1_eval_float(p, x):
    total = 0.0
    for c in reversed(p):
        total = total * x + float(c)
    return total


def poly1_divmod(p, q):
    p = poly1_trim(p)
    q = poly1_trim(q)
    if poly1_is_zero(q):
        raise ZeroDivisionError("polynomial division by zero")
    quot = [Fraction(0)] * max(1, len(p) - len(q) + 1)
    rem = list(p)
    dq = len(q) - 1
    lead = q[-1]
    while len(rem) - 1 >= dq and not poly1_is_zero(rem):
        shift = len(rem) - 1 - dq
        factor = rem[-1] / lead
        quot[shift] += factor
        for i, c in enumerate(q):
            rem[shift + i] -= factor * c
        rem = poly1_trim(rem)
        if len(rem) - 1 < dq or poly1_is_zero(rem):
            break
    return poly1_trim(quot), poly1_trim(rem)


def sturm_chain(p):
    """Sturm sequence p, p', then negated remainders until constant."""
    p = poly1_trim(p)
    chain = [p]
    d = poly1_diff(p)
    if not poly1_is_zero(d):
        chain.append(d)
        while len(chain[-1]) > 1:
            _, rem = poly1_divmod(chain[-2], chain[-1])
            if poly1_is_zero(rem):
                break
            chain.append(poly1_scale(-1, rem))
    return chain


def _sign_changes(values):
    signs = [1 if v > 0 else -1 for v in values if v != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def sturm_count(p, lo, hi=None):
    """Number of distinct real roots in (lo, hi] (hi=None means +infinity).

    Endpoint roots at lo are excluded, at hi included, per the classical
    convention; callers that need open intervals nudge the endpoints.
    """
    chain = sturm_chain(p)
    vlo = [poly1_eval(q, lo) for q in chain]
    if hi is None:
        vhi = [q[-1] for q in chain]  # sign at +infinity = leading coefficient
    else:
        vhi = [poly1_eval(q, hi) for q in chain]
    return _sign_changes(vlo) - _sign_changes(vhi)


def cauchy_root_bound(p):
    p = poly1_trim(p)
    lead = abs(p[-1])
    if lead == 0:
        return Fraction(1)
    return Fraction(1) + max(
        (abs(c) / lead for c in p[:-1]), default=Fraction(0)
    )


def isolate_smallest_root(p, lo, hi=None, width=Fraction(1, 10**12)):
    """Isolating interval of the smallest root in (lo, hi]; None if rootless.

    Pure Sturm bisection, exact until the final interval width.
    """
    p = poly1_trim(p)
    if poly1_is_zero(p):
        raise ValueError("zero polynomial")
    if hi is None:
        hi = max(fr(lo) + 1, cauchy_root_bound(p))
        while sturm_count(p, lo, hi) < sturm_count(p, lo, None):
            hi = hi * 2
    lo, hi = fr(lo), fr(hi)
    if sturm_count(p, lo, hi) == 0:
        return None
    while hi - lo > width:
        mid = (lo + hi) / 2
        if sturm_count(p, lo, mid) > 0:
            hi = mid
        else:
            lo = mid
    return lo, hi


def poly1_series_inverse(q, nterms):
    """Power series inverse of q (q[0] != 0) to the requested order."""
    if q[0] == 0:
        raise ZeroDivisionError("series inverse needs a unit constant term")
    inv = [Fraction(1) / q[0]]
    for n in range(1, nterms):
        acc = Fraction(0)
        for k in range(1, min(n, len(q) - 1) + 1):
            acc += q[k] * inv[n - k]
        inv.append(-acc / q[0])
    return inv


def poly1_series_mul(p, q, nterms):
    out = [Fraction(0)] * nterms
    for i, a in enumerate(p[:nterms]):
        if a == 0:
            continue
        for j, b in enumerate(q[: nterms - i]):
            out[i + j] += a * b
    return out
