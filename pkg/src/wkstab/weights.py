"""Symbolic weight functions of the form poly * factors^exp * exp(-<lam,x>).

The class is closed under differentiation, products, and affine pullback to
facet charts, which is what the curvature operators and boundary integrals
need.  All coefficient arithmetic is exact rational; only final evaluation
goes to floats.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import FactorNotPositive, PoleOnDomain, SchemaError
from .lp import OPTIMAL, UNBOUNDED, sup_linear
from .polynomials import Polynomial
from .rational import ExactExp, dot, fr, fr_str, vec

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AffineForm:
    """<b, x> + c with rational data."""

    b: tuple
    c: Fraction

    def __init__(self, b, c):
        object.__setattr__(self, "b", vec(b))
        object.__setattr__(self, "c", fr(c))

    def value(self, x):
        return dot(self.b, [fr(xi) for xi in x]) + self.c

    def as_polynomial(self) -> Polynomial:
        return Polynomial.affine(self.b, self.c)

    @classmethod
    def from_polynomial(cls, p: Polynomial):
        if p.degree() > 1:
            raise ValueError("polynomial is not affine")
        c = p.terms.get(tuple([0] * p.nvars), Fraction(0))
        b = [Fraction(0)] * p.nvars
        for e, coeff in p.terms.items():
            if sum(e) == 1:
                b[e.index(1)] = coeff
        return cls(b, c)

    def to_json(self):
        return {"b": [fr_str(x) for x in self.b], "c": fr_str(self.c)}

    @classmethod
    def from_json(cls, data):
        return cls([fr(x) for x in data["b"]], fr(data["c"]))


class WeightTerm:
    """One summand: poly(x) * prod base_k(x)^e_k * exp(-(<decay,x> + shift)).

    Factor exponents are negative after canonicalization (positive powers get
    expanded into the polynomial part).  ``shift`` is a rational constant in
    the exponent; it arises from restricting a weight to an affine chart and
    keeps such restrictions exact.
    """

    __slots__ = ("poly", "factors", "decay", "shift")

    def __init__(self, poly, factors=(), decay=None, shift=0):
        if not isinstance(poly, Polynomial):
            raise TypeError("poly must be a Polynomial")
        self.poly = poly
        self.factors = tuple(
            (base, int(e)) for base, e in factors
        )
        n = poly.nvars
        self.decay = vec(decay) if decay is not None else tuple([Fraction(0)] * n)
        if len(self.decay) != n:
            raise ValueError("decay arity mismatch")
        self.shift = fr(shift)

    @property
    def nvars(self):
        return self.poly.nvars

    def sort_key(self):
        return (
            self.decay,
            self.shift,
            tuple(sorted((b.sort_key(), e) for b, e in self.factors)),
            self.poly.sort_key(),
        )

    def __repr__(self):
        return (
            f"WeightTerm(poly={self.poly!r}, factors={self.factors!r}, "
            f"decay={self.decay}, shift={self.shift})"
        )


def _canonical_terms(terms):
    merged = {}
    for t in terms:
        poly = t.poly
        bases = {}
        order = []
        for base, e in t.factors:
            if e == 0 or base.degree() == 0:
                const = base.terms.get(tuple([0] * base.nvars), Fraction(0))
                if e != 0:
                    if const == 0:
                        raise ZeroDivisionError("zero constant factor base")
                    poly = poly * (
                        const**e if e > 0 else Fraction(1) / const ** (-e)
                    )
                continue
            content, prim = base.content_and_primitive()
            key = prim.sort_key()
            if key in bases:
                bases[key][1] += e
            else:
                bases[key] = [prim, e]
                order.append(key)
            poly = poly * (
                content**e if e > 0 else Fraction(1) / content ** (-e)
            )
        factors = []
        for key in order:
            prim, e = bases[key]
            if e == 0:
                continue
            if e > 0:
                poly = poly * prim**e
            else:
                factors.append((prim, e))
        if poly.is_zero():
            continue
        factors = tuple(sorted(factors, key=lambda fe: (fe[0].sort_key(), fe[1])))
        mkey = (t.decay, t.shift, tuple((b.sort_key(), e) for b, e in factors))
        if mkey in merged:
            prev = merged[mkey]
            merged[mkey] = WeightTerm(
                prev.poly + poly, factors, t.decay, t.shift
            )
        else:
            merged[mkey] = WeightTerm(poly, factors, t.decay, t.shift)
    out = [t for t in merged.values() if not t.poly.is_zero()]
    out.sort(key=lambda t: t.sort_key())
    return tuple(out)


class Weight:
    """Finite sum of WeightTerms; immutable; exact term arithmetic.

    Equality compares canonical term lists, so algebraic identities that the
    canonicalization captures (merging like terms, expanding positive factor
    powers) are decidable.
    """

    __slots__ = ("nvars", "terms", "domain", "_diff_cache", "_grad", "_hess")

    def __init__(self, nvars, terms=(), domain=None):
        self.nvars = int(nvars)
        terms = tuple(terms)
        for t in terms:
            if t.nvars != self.nvars:
                raise ValueError("term arity mismatch")
        self.terms = _canonical_terms(terms)
        self.domain = domain
        self._diff_cache = {}
        self._grad = None
        self._hess = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, nvars, c, domain=None):
        return cls(
            nvars, [WeightTerm(Polynomial.constant(nvars, c))], domain=domain
        )

    @classmethod
    def exponential(cls, lam, coeff=1, domain=None):
        lam = vec(lam)
        n = len(lam)
        return cls(
            n,
            [WeightTerm(Polynomial.constant(n, coeff), (), lam)],
            domain=domain,
        )

    @classmethod
    def from_polynomial(cls, p, decay=None, domain=None):
        return cls(p.nvars, [WeightTerm(p, (), decay)], domain=domain)

    def with_domain(self, domain):
        return Weight(self.nvars, self.terms, domain=domain)

    # -- algebra ------------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Weight.constant(self.nvars, other)
        if not isinstance(other, Weight):
            return NotImplemented
        if other.nvars != self.nvars:
            raise ValueError("arity mismatch")
        return Weight(
            self.nvars,
            self.terms + other.terms,
            domain=self.domain or other.domain,
        )

    __radd__ = __add__

    def __neg__(self):
        return self * Fraction(-1)

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Weight.constant(self.nvars, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return Weight(
                self.nvars,
                [
                    WeightTerm(t.poly * fr(other), t.factors, t.decay, t.shift)
                    for t in self.terms
                ],
                domain=self.domain,
            )
        if isinstance(other, Polynomial):
            other = Weight.from_polynomial(other)
        if not isinstance(other, Weight):
            return NotImplemented
        if other.nvars != self.nvars:
            raise ValueError("arity mismatch")
        out = []
        for t1 in self.terms:
            for t2 in other.terms:
                out.append(
                    WeightTerm(
                        t1.poly * t2.poly,
                        t1.factors + t2.factors,
                        tuple(a + b for a, b in zip(t1.decay, t2.decay)),
                        t1.shift + t2.shift,
                    )
                )
        return Weight(self.nvars, out, domain=self.domain or other.domain)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, Weight):
            return NotImplemented
        if self.nvars != other.nvars:
            return False
        return [t.sort_key() for t in self.terms] == [
            t.sort_key() for t in other.terms
        ]

    def __hash__(self):
        return hash((self.nvars, tuple(t.sort_key() for t in self.terms)))

    def is_zero(self):
        return not self.terms

    # -- evaluation ---------------------------------------------------------

    def value_exact(self, x) -> ExactExp:
        """Exact value at a rational point, as a sum of c*e^q."""
        x = [fr(xi) for xi in x]
        acc = ExactExp()
        for t in self.terms:
            coeff = t.poly.eval(x)
            for base, e in t.factors:
                bval = base.eval(x)
                if bval == 0:
                    raise PoleOnDomain(
                        "factor base vanishes at evaluation point",
                        point=[float(v) for v in x],
                    )
                coeff *= bval**e
            q = -(dot(t.decay, x) + t.shift)
            acc = acc + ExactExp({q: coeff})
        return acc

    def value(self, x) -> float:
        return float(self.value_exact(x))

    def value_array(self, pts) -> np.ndarray:
        """Float values on an (N, nvars) array of points."""
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[0])
        for t in self.terms:
            vals = t.poly.eval_array(pts)
            for base, e in t.factors:
                b = base.eval_array(pts)
                vals = vals * b ** float(e)
            lam = np.array([float(l) for l in t.decay])
            vals = vals * np.exp(-(pts @ lam + float(t.shift)))
            out += vals
        return out

    def differentiate(self, i) -> "Weight":
        """Exact partial derivative; stays in the class."""
        i = int(i)
        if i in self._diff_cache:
            return self._diff_cache[i]
        out = []
        for t in self.terms:
            out.append(WeightTerm(t.poly.diff(i), t.factors, t.decay, t.shift))
            for k, (base, e) in enumerate(t.factors):
                dbase = base.diff(i)
                if dbase.is_zero():
                    continue
                new_factors = list(t.factors)
                new_factors[k] = (base, e - 1)
                out.append(
                    WeightTerm(
                        t.poly * dbase * Fraction(e),
                        tuple(new_factors),
                        t.decay,
                        t.shift,
                    )
                )
            if t.decay[i] != 0:
                out.append(
                    WeightTerm(
                        t.poly * (-t.decay[i]), t.factors, t.decay, t.shift
                    )
                )
        w = Weight(self.nvars, out, domain=self.domain)
        self._diff_cache[i] = w
        return w

    def gradient_weights(self):
        if self._grad is None:
            self._grad = tuple(
                self.differentiate(i) for i in range(self.nvars)
            )
        return self._grad

    def hessian_weights(self):
        if self._hess is None:
            self._hess = tuple(
                tuple(
                    self.differentiate(i).differentiate(j)
                    for j in range(self.nvars)
                )
                for i in range(self.nvars)
            )
        return self._hess

    def grad(self, x) -> np.ndarray:
        return np.array([w.value(x) for w in self.gradient_weights()])

    def hess(self, x) -> np.ndarray:
        hw = self.hessian_weights()
        return np.array(
            [[hw[i][j].value(x) for j in range(self.nvars)] for i in range(self.nvars)]
        )

    # -- restriction --------------------------------------------------------

    def pullback_affine(self, matrix, point, domain=None) -> "Weight":
        """Restrict along x = point + matrix @ t (columns of matrix = chart).

        The exponential picks up the exact rational constant <decay, point>,
        stored in the shift so restricted weights remain exactly integrable.
        """
        point = [fr(p) for p in point]
        matrix = [[fr(v) for v in row] for row in matrix]
        m = len(matrix[0]) if matrix else 0
        out = []
        for t in self.terms:
            poly = t.poly.compose_affine(matrix, point)
            factors = []
            extra = Fraction(1)
            ok = True
            for base, e in t.factors:
                nb = base.compose_affine(matrix, point)
                if nb.degree() <= 0:
                    const = nb.terms.get(tuple([0] * m), Fraction(0))
                    if const == 0:
                        raise PoleOnDomain(
                            "factor base vanishes identically on the chart"
                        )
                    extra *= const**e if e > 0 else Fraction(1) / const ** (-e)
                else:
                    factors.append((nb, e))
            if not ok:
                continue
            new_decay = tuple(
                sum(
                    (t.decay[i] * matrix[i][j] for i in range(self.nvars)),
                    Fraction(0),
                )
                for j in range(m)
            )
            new_shift = t.shift + dot(t.decay, point)
            out.append(
                WeightTerm(poly * extra, tuple(factors), new_decay, new_shift)
            )
        return Weight(m, out, domain=domain)

    # -- structure ----------------------------------------------------------

    def decay_vectors(self):
        return sorted({t.decay for t in self.terms})

    def has_rational_factors(self):
        return any(t.factors for t in self.terms)

    def max_poly_degree(self):
        return max((t.poly.degree() for t in self.terms), default=-1)

    def to_json(self):
        terms = []
        for t in self.terms:
            entry = {
                "poly": {
                    "coeffs": [
                        [list(e), fr_str(c)]
                        for e, c in sorted(t.poly.terms.items())
                    ]
                },
                "factors": [],
                "decay": [fr_str(l) for l in t.decay],
            }
            for base, e in t.factors:
                if base.degree() <= 1:
                    af = AffineForm.from_polynomial(base)
                    entry["factors"].append({**af.to_json(), "exp": e})
                else:
                    entry["factors"].append(
                        {
                            "poly": {
                                "coeffs": [
                                    [list(ex), fr_str(c)]
                                    for ex, c in sorted(base.terms.items())
                                ]
                            },
                            "exp": e,
                        }
                    )
            if t.shift != 0:
                entry["shift"] = fr_str(t.shift)
            terms.append(entry)
        return {"terms": terms}

    @classmethod
    def from_json(cls, data, nvars=None, domain=None):
        try:
            raw_terms = data["terms"]
            terms = []
            for entry in raw_terms:
                coeffs = entry["poly"]["coeffs"]
                if nvars is None:
                    if coeffs:
                        nvars = len(coeffs[0][0])
                    elif "decay" in entry:
                        nvars = len(entry["decay"])
                    else:
                        raise SchemaError("cannot infer variable count")
                poly = Polynomial(
                    nvars, {tuple(e): fr(c) for e, c in coeffs}
                )
                factors = []
                for f in entry.get("factors", []):
                    e = int(f["exp"])
                    if "poly" in f:
                        base = Polynomial(
                            nvars,
                            {tuple(ex): fr(c) for ex, c in f["poly"]["coeffs"]},
                        )
                    else:
                        base = AffineForm.from_json(f).as_polynomial()
                    factors.append((base, e))
                decay = [fr(l) for l in entry.get("decay", [0] * nvars)]
                shift = fr(entry.get("shift", 0))
                terms.append(WeightTerm(poly, factors, decay, shift))
            if nvars is None:
                raise SchemaError("empty weight needs explicit nvars")
            return cls(nvars, terms, domain=domain)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed weight JSON: {exc}") from exc

    def __repr__(self):
        return f"Weight(nvars={self.nvars}, terms={len(self.terms)})"


# -- paper weight constructors ------------------------------------------------


def soliton_weight_w(v: Weight, n=None) -> Weight:
    """w = 2(n*v + <x, grad v>), the weight making (v,w)-cscK a v-soliton."""
    if n is None:
        n = v.nvars
    acc = v * Fraction(2 * int(n))
    for i in range(v.nvars):
        xi = Polynomial.variable(i, v.nvars)
        acc = acc + v.differentiate(i) * xi * Fraction(2)
    return acc.with_domain(v.domain)


def _affine_min_on(poly, b, c):
    """(positive, witness) for <b,x> + c over the closed polyhedron."""
    b = vec(b)
    c = fr(c)
    rows = [hs.normal for hs in poly.halfspaces]
    offs = [hs.offset for hs in poly.halfspaces]
    status, value, argmax = sup_linear([-x for x in b], rows, offs)
    if status == UNBOUNDED:
        base = poly.interior_point()
        for g in poly.recession_cone().rays:
            if dot(b, g) < 0:
                t = Fraction(1)
                while dot(b, [base[i] + t * g[i] for i in range(len(b))]) + c > 0:
                    t *= 2
                return False, tuple(
                    base[i] + t * g[i] for i in range(len(b))
                )
        for g in poly.recession_cone().lines:
            s = dot(b, g)
            if s != 0:
                sign = -1 if s > 0 else 1
                t = Fraction(sign)
                while dot(b, [base[i] + t * g[i] for i in range(len(b))]) + c > 0:
                    t *= 2
                return False, tuple(
                    base[i] + t * g[i] for i in range(len(b))
                )
        return False, tuple(base)
    if status != OPTIMAL:
        return False, None
    minimum = -value + c
    if minimum > 0:
        return True, None
    return False, argmax


def fibration_transform(v: Weight, w: Weight, data, polyhedron=None):
    """Pull (v, w) through a semisimple-principal fibration.

    ``data`` is a list of (p_a, c_a, n_a, s_a); returns (p*v, p*w - v*pq)
    where p = prod(<p_a,x> + c_a)^{n_a} and pq expands p * sum s_a/(...).
    """
    P = polyhedron or v.domain or w.domain
    n = v.nvars
    parsed = []
    for p_a, c_a, n_a, s_a in data:
        p_a = vec(p_a)
        c_a = fr(c_a)
        n_a = int(n_a)
        s_a = fr(s_a)
        if n_a < 1:
            raise ValueError("factor multiplicity must be >= 1")
        if P is not None:
            positive, witness = _affine_min_on(P, p_a, c_a)
            if not positive:
                raise FactorNotPositive(
                    "fibration factor is not strictly positive on the domain",
                    witness=None
                    if witness is None
                    else [float(x) for x in witness],
                )
        parsed.append((Polynomial.affine(p_a, c_a), n_a, s_a))

    p_poly = Polynomial.constant(n, 1)
    for base, n_a, _ in parsed:
        p_poly = p_poly * base**n_a
    pq_poly = Polynomial.constant(n, 0)
    for k, (base, n_a, s_a) in enumerate(parsed):
        piece = Polynomial.constant(n, s_a) * base ** (n_a - 1)
        for j, (other, n_b, _) in enumerate(parsed):
            if j != k:
                piece = piece * other**n_b
        pq_poly = pq_poly + piece
    v_t = (v * p_poly).with_domain(P)
    w_t = (w * p_poly - v * pq_poly).with_domain(P)
    return v_t, w_t


def krs_fibration_weight(data, b_w, nvars=None, polyhedron=None) -> Weight:
    """v = prod(<p_a,x> + k_a)^{n_a} * exp(-<b_w,x>)."""
    b_w = vec(b_w)
    n = nvars if nvars is not None else len(b_w)
    poly = Polynomial.constant(n, 1)
    for p_a, k_a, n_a in data:
        p_a = vec(p_a)
        if polyhedron is not None:
            positive, witness = _affine_min_on(polyhedron, p_a, fr(k_a))
            if not positive:
                raise FactorNotPositive(
                    "weight factor is not strictly positive on the domain",
                    witness=None
                    if witness is None
                    else [float(x) for x in witness],
                )
        poly = poly * Polynomial.affine(p_a, k_a) ** int(n_a)
    return Weight(
        n, [WeightTerm(poly, (), b_w)], domain=polyhedron
    )


# -- class membership check ---------------------------------------------------


@dataclass
class ClassReport:
    """Sampled evidence for membership in the exponential-decay class.

    ``passed`` aggregates the individual checks; ``qualifier`` is always
    "numerical evidence, not proof" because positivity and sups are sampled.
    """

    passed: bool
    v_positive: bool
    decay_rate: float
    decay_rates: list
    deriv_growth: dict
    w_growth: dict
    levels: list
    details: dict
    qualifier: str = "numerical evidence, not proof"

    def to_dict(self):
        return {
            "passed": self.passed,
            "v_positive": self.v_positive,
            "decay_rate": self.decay_rate,
            "decay_rates": self.decay_rates,
            "deriv_growth": {str(k): v for k, v in self.deriv_growth.items()},
            "w_growth": {str(k): v for k, v in self.w_growth.items()},
            "levels": self.levels,
            "qualifier": self.qualifier,
            "details": self.details,
        }


def _sample_points(P, delta_star, count, seed=0):
    """Deterministic sample of the truncation: vertices, ray probes, grid."""
    Q = P.truncate(delta_star=delta_star)
    pts = [tuple(float(c) for c in vtx) for vtx in Q.vertices()]
    base = P.interior_point()
    pts.append(tuple(float(c) for c in base))
    for g in P.recession_cone().rays:
        for tscale in (Fraction(1, 2), Fraction(1), Fraction(2)):
            cand = [
                base[i] + tscale * delta_star * g[i] for i in range(P.dim)
            ]
            if Q.contains(cand):
                pts.append(tuple(float(c) for c in cand))
    lo = [min(float(v[i]) for v in Q.vertices()) for i in range(P.dim)]
    hi = [max(float(v[i]) for v in Q.vertices()) for i in range(P.dim)]
    rng = np.random.default_rng(seed)
    tries = 0
    while len(pts) < count and tries < 400 * count:
        x = rng.uniform(lo, hi)
        tries += 1
        if Q.contains([fr(float(c)) for c in x]):
            pts.append(tuple(float(c) for c in x))
    return np.array(pts, dtype=float)


def _fit_slope(xs, ys):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 2:
        return 0.0
    A = np.vstack([xs, np.ones_like(xs)]).T
    sol, *_ = np.linalg.lstsq(A, ys, rcond=None)
    return float(sol[0])


def _multi_indices(n, max_order):
    out = []

    def rec(prefix, remaining, slots):
        if slots == 0:
            out.append(tuple(prefix))
            return
        for k in range(remaining + 1):
            rec(prefix + [k], remaining - k, slots - 1)

    for order in range(max_order + 1):
        rec([], order, n)
    seen = []
    for alpha in out:
        if sum(alpha) <= max_order and alpha not in seen:
            seen.append(alpha)
    return seen


def _apply_multi(w: Weight, alpha):
    out = w
    for i, k in enumerate(alpha):
        for _ in range(k):
            out = out.differentiate(i)
    return out


def check_class_W(
    v: Weight,
    w: Weight,
    P,
    beta_star,
    k_max=2,
    levels=(10, 20, 40),
    samples_per_level=200,
    growth_tol=0.02,
    min_decay_rate=1e-3,
    seed=0,
) -> ClassReport:
    """Sampled check that (v, w) lie in the admissible weight class.

    Estimates, on nested truncations, the decay-rate fit for v, the sups of
    |d^a v|/v for |a| <= k_max, and of v^{-beta_star} |d^a w|; growth of a sup
    across levels reads as an unbounded constant and fails the check.  All
    output is labelled as sampled evidence.
    """
    beta_star = float(beta_star)
    alphas = [a for a in _multi_indices(v.nvars, k_max) if sum(a) >= 1]
    v_derivs = {a: _apply_multi(v, a) for a in alphas}
    w_derivs = {a: _apply_multi(w, a) for a in _multi_indices(w.nvars, k_max)}

    decay_rates = []
    deriv_sups = {a: [] for a in alphas}
    w_sups = {a: [] for a in w_derivs}
    v_positive = True
    details = {}
    for delta in levels:
        pts = _sample_points(P, fr(delta), samples_per_level, seed=seed)
        vv = v.value_array(pts)
        if np.min(vv) <= 0:
            v_positive = False
        safe = np.abs(vv) + 1e-300
        r = np.linalg.norm(pts, axis=1)
        mask = r > 1e-9
        decay_rates.append(
            -_fit_slope(r[mask], np.log(safe[mask]))
        )
        for a, dv in v_derivs.items():
            deriv_sups[a].append(float(np.max(np.abs(dv.value_array(pts)) / safe)))
        for a, dw in w_derivs.items():
            w_sups[a].append(
                float(np.max(np.abs(dw.value_array(pts)) / safe**beta_star))
            )

    xs = [float(d) for d in levels]
    deriv_growth = {
        a: _fit_slope(xs, np.log(np.array(s) + 1e-300))
        for a, s in deriv_sups.items()
    }
    w_growth = {
        a: _fit_slope(xs, np.log(np.array(s) + 1e-300))
        for a, s in w_sups.items()
    }
    decay_rate = decay_rates[-1]
    decay_ok = decay_rate > min_decay_rate
    deriv_ok = all(g <= growth_tol for g in deriv_growth.values())
    w_ok = all(g <= growth_tol for g in w_growth.values())
    details["deriv_sups"] = {str(a): s for a, s in deriv_sups.items()}
    details["w_sups"] = {str(a): s for a, s in w_sups.items()}
    details["checks"] = {
        "v_positive": v_positive,
        "decay_ok": decay_ok,
        "deriv_bounded": deriv_ok,
        "w_bounded": w_ok,
    }
    passed = v_positive and decay_ok and deriv_ok and w_ok
    return ClassReport(
        passed=passed,
        v_positive=v_positive,
        decay_rate=decay_rate,
        decay_rates=decay_rates,
        deriv_growth=deriv_growth,
        w_growth=w_growth,
        levels=list(levels),
        details=details,
    )
