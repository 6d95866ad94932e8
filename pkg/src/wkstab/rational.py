"""Exact rational arithmetic helpers.

All combinatorial geometry in this package runs over ``fractions.Fraction``;
floats only appear when a result is handed to the numerical layer.  This
module collects the small linear-algebra kernel used everywhere: solving
square systems, nullspaces, integer lattice bases of hyperplanes, and the
``ExactExp`` ring of finite sums  sum_k c_k * exp(q_k)  with rational c_k, q_k
in which exact 1D integrals of polynomial-times-exponential data live.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath


def fr(x) -> Fraction:
    """Coerce ints, 'p/q' strings, floats and Fractions to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a rational value")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    raise TypeError(f"cannot interpret {x!r} as a rational number")


def fr_str(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def vec(xs) -> tuple:
    return tuple(fr(x) for x in xs)


def dot(a: Sequence, b: Sequence):
    return sum((ai * bi for ai, bi in zip(a, b)), Fraction(0))


def vadd(a, b):
    return tuple(ai + bi for ai, bi in zip(a, b))


def vsub(a, b):
    return tuple(ai - bi for ai, bi in zip(a, b))


def vscale(c, a):
    c = fr(c)
    return tuple(c * ai for ai in a)


def norm2(a):
    """Squared Euclidean norm, exact."""
    return dot(a, a)


def mat_vec(rows, x):
    return tuple(dot(r, x) for r in rows)


def det(rows) -> Fraction:
    """Determinant by fraction-free-ish Gaussian elimination (exact)."""
    n = len(rows)
    a = [[Fraction(x) for x in row] for row in rows]
    sign = 1
    result = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            sign = -sign
        p = a[col][col]
        result *= p
        for r in range(col + 1, n):
            if a[r][col] != 0:
                f = a[r][col] / p
                for c in range(col, n):
                    a[r][c] -= f * a[col][c]
    return sign * result


def solve(rows, rhs):
    """Solve a square rational system; returns None when singular."""
    n = len(rows)
    a = [[Fraction(x) for x in row] + [Fraction(rhs[i])] for i, row in enumerate(rows)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return None
        a[col], a[pivot] = a[pivot], a[col]
        p = a[col][col]
        a[col] = [x / p for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return tuple(a[i][n] for i in range(n))


def rank(rows) -> int:
    if not rows:
        return 0
    m, n = len(rows), len(rows[0])
    a = [[Fraction(x) for x in row] for row in rows]
    r = 0
    for col in range(n):
        pivot = next((i for i in range(r, m) if a[i][col] != 0), None)
        if pivot is None:
            continue
        a[r], a[pivot] = a[pivot], a[r]
        p = a[r][col]
        a[r] = [x / p for x in a[r]]
        for i in range(m):
            if i != r and a[i][col] != 0:
                f = a[i][col]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        r += 1
        if r == m:
            break
    return r


def kernel_basis(rows, n=None):
    """Rational basis of the nullspace of the given row list."""
    if not rows:
        return [tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n)]
    m = len(rows)
    n = len(rows[0]) if n is None else n
    a = [[Fraction(x) for x in row] for row in rows]
    pivots = []
    r = 0
    for col in range(n):
        pivot = next((i for i in range(r, m) if a[i][col] != 0), None)
        if pivot is None:
            continue
        a[r], a[pivot] = a[pivot], a[r]
        p = a[r][col]
        a[r] = [x / p for x in a[r]]
        for i in range(m):
            if i != r and a[i][col] != 0:
                f = a[i][col]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(col)
        r += 1
        if r == m:
            break
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for fcol in free:
        v = [Fraction(0)] * n
        v[fcol] = Fraction(1)
        for i, pcol in enumerate(pivots):
            v[pcol] = -a[i][fcol]
        basis.append(tuple(v))
    return basis


def primitivize(v):
    """Scale a nonzero rational vector to a primitive integer vector.

    Returns the integer vector with the same direction whose entries have
    gcd 1 and whose first nonzero entry keeps the original sign.
    """
    v = vec(v)
    if all(x == 0 for x in v):
        raise ValueError("zero vector has no primitive representative")
    denom_lcm = 1
    for x in v:
        denom_lcm = denom_lcm * x.denominator // math.gcd(denom_lcm, x.denominator)
    ints = [int(x * denom_lcm) for x in v]
    g = 0
    for x in ints:
        g = math.gcd(g, abs(x))
    return tuple(x // g for x in ints)


def is_primitive_integer(v) -> bool:
    ints = []
    for x in v:
        x = fr(x)
        if x.denominator != 1:
            return False
        ints.append(int(x))
    g = 0
    for x in ints:
        g = math.gcd(g, abs(x))
    return g == 1


def _xgcd(a: int, b: int):
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    return old_r, old_s, old_t


def lattice_kernel_basis(v):
    """Integer basis of {x in Z^n : <v, x> = 0} for a nonzero integer vector.

    Uses unimodular column operations, so the returned n-1 vectors span the
    hyperplane lattice (not merely a finite-index sublattice).
    """
    v = [int(x) for x in v]
    n = len(v)
    u = [[1 if i == j else 0 for j in range(n)] for i in range(n)]  # columns of U
    w = list(v)
    pivot = next((j for j in range(n) if w[j] != 0), None)
    if pivot is None:
        raise ValueError("zero vector")
    if pivot != 0:
        w[0], w[pivot] = w[pivot], w[0]
        for i in range(n):
            u[i][0], u[i][pivot] = u[i][pivot], u[i][0]
    for j in range(1, n):
        if w[j] == 0:
            continue
        g, s, t = _xgcd(w[0], w[j])
        a0, aj = w[0] // g, w[j] // g
        for i in range(n):
            c0, cj = u[i][0], u[i][j]
            u[i][0] = s * c0 + t * cj
            u[i][j] = -aj * c0 + a0 * cj
        w[0], w[j] = g, 0
    return [tuple(u[i][j] for i in range(n)) for j in range(1, n)]


def hyperplane_measure_scale(basis, normal) -> Fraction:
    """Conversion factor from basis coordinates to (surface measure)/|normal|.

    For directions b_1..b_{n-1} orthogonal to ``normal`` the Euclidean
    (n-1)-volume of their parallelepiped equals |det(b_1..b_{n-1}, normal)| /
    |normal|, so the weighted surface measure dS/|normal| pulls back to
    |det(...)| / <normal, normal> times Lebesgue measure, an exact rational.
    """
    rows = [vec(b) for b in basis] + [vec(normal)]
    for b in basis:
        if dot(b, normal) != 0:
            raise ValueError("basis must be orthogonal to the normal")
    return abs(det(rows)) / norm2(normal)


class ExactExp:
    """Element of the ring of finite sums  sum c_k exp(q_k), c_k, q_k rational.

    Supports ring arithmetic, exact equality, and high-precision conversion
    to float via mpmath (precision adapted to coefficient bit lengths, so
    astronomically large rational coefficients still cancel correctly).
    """

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        data = {}
        if isinstance(terms, dict):
            src = terms.items()
        elif terms is None:
            src = []
        else:
            src = terms
        for q, c in src:
            q, c = fr(q), fr(c)
            if c == 0:
                continue
            data[q] = data.get(q, Fraction(0)) + c
            if data[q] == 0:
                del data[q]
        self.terms = data

    @classmethod
    def constant(cls, c):
        return cls([(Fraction(0), fr(c))])

    @classmethod
    def exp(cls, q, coeff=1):
        return cls([(fr(q), fr(coeff))])

    def __add__(self, other):
        other = _coerce_exact(other)
        out = dict(self.terms)
        for q, c in other.terms.items():
            out[q] = out.get(q, Fraction(0)) + c
            if out[q] == 0:
                del out[q]
        return ExactExp(out)

    __radd__ = __add__

    def __neg__(self):
        return ExactExp({q: -c for q, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-_coerce_exact(other))

    def __rsub__(self, other):
        return _coerce_exact(other) + (-self)

    def __mul__(self, other):
        other = _coerce_exact(other)
        out = {}
        for q1, c1 in self.terms.items():
            for q2, c2 in other.terms.items():
                q = q1 + q2
                out[q] = out.get(q, Fraction(0)) + c1 * c2
                if out[q] == 0:
                    del out[q]
        return ExactExp(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        try:
            other = _coerce_exact(other)
        except TypeError:
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def is_zero(self) -> bool:
        return not self.terms

    def is_rational(self) -> bool:
        return all(q == 0 for q in self.terms)

    def as_rational(self) -> Fraction:
        if not self.is_rational():
            raise ValueError("value involves nontrivial exponentials")
        return self.terms.get(Fraction(0), Fraction(0))

    def __float__(self):
        if not self.terms:
            return 0.0
        bits = 64
        for q, c in self.terms.items():
            bits = max(
                bits,
                c.numerator.bit_length() + c.denominator.bit_length(),
                int(abs(q)) * 2 + 64,
            )
        with mpmath.workprec(bits + 64):
            total = mpmath.mpf(0)
            for q, c in sorted(self.terms.items()):
                qv = mpmath.mpf(q.numerator) / q.denominator
                total += mpmath.mpf(c.numerator) / c.denominator * mpmath.exp(qv)
            return float(total)

    def __repr__(self):
        if not self.terms:
            return "ExactExp(0)"
        bits = []
        for q, c in sorted(self.terms.items()):
            if q == 0:
                bits.append(fr_str(c))
            else:
                bits.append(f"{fr_str(c)}*e^({fr_str(q)})")
        return "ExactExp(" + " + ".join(bits) + ")"


def _coerce_exact(x):
    if isinstance(x, ExactExp):
        return x
    if isinstance(x, (int, Fraction)):
        return ExactExp.constant(x)
    raise TypeError(f"cannot coerce {x!r} to ExactExp")


def pairwise_sum(values: Iterable[float]) -> float:
    """Deterministic compensated pairwise summation.

    Leaves of up to 32 entries are added with Neumaier compensation, then
    combined pairwise; the reduction tree depends only on the input order.
    """
    vals = list(values)
    if not vals:
        return 0.0
    if len(vals) <= 32:
        total = 0.0
        comp = 0.0
        for x in vals:
            t = total + x
            if abs(total) >= abs(x):
                comp += (total - t) + x
            else:
                comp += (x - t) + total
            total = t
        return total + comp
    mid = len(vals) // 2
    return pairwise_sum(vals[:mid]) + pairwise_sum(vals[mid:])
