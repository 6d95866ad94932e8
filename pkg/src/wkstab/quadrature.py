"""Deterministic integration of weight-class integrands on polyhedra.

Three layers, used in this order when applicable:
  1. exact closed forms: 1D polynomial*exp antiderivatives and separable
     axis-product domains, carried in rational*e^rational arithmetic;
  2. an adaptive simplex engine (degree-7 symmetric rule with a nested
     degree-5 error estimate, longest-edge bisection);
  3. certified exponential tail bounds for the truncated remainder, from an
     explicit polynomial-times-exponential envelope along the truncation
     direction.

Results are bit-identical for any worker count: cells are evaluated in a
fixed order and reduced with a fixed compensated pairwise tree.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DivergentIntegral, ToleranceNotMet
from .geometry import AUTO, AffineSlice, Polyhedron
from .lp import OPTIMAL, sup_linear
from .polynomials import (
    Polynomial,
    poly1_antiderivative,
    poly1_diff,
    poly1_eval,
    poly1_is_zero,
    poly1_mul,
    poly1_trim,
)
from .rational import ExactExp, dot, fr, norm2, pairwise_sum, vec

DEFAULT_REL_TOL = 1e-8
_DELTA_CAP = 200


@dataclass
class IntegralResult:
    value: float
    abs_error_bound: float
    tail_bound: float
    cells_used: int
    converged: bool = True
    exact: ExactExp | None = None

    def total_error(self):
        return self.abs_error_bound + self.tail_bound


# -- exact 1D layer -------------------------------------------------------------


def exact_1d(poly, lam, a, b=None) -> ExactExp:
    """Integral of poly(x) e^(-lam x) over [a, b] ([a, inf) when b is None).

    Uses the closed-form antiderivative -e^(-lam x) * sum_j p^(j)(x)/lam^(j+1);
    the value is exact as a rational combination of e^(rational).
    """
    poly = poly1_trim([fr(c) for c in poly])
    lam = fr(lam)
    a = fr(a)
    if b is not None:
        b = fr(b)
    if poly1_is_zero(poly):
        return ExactExp()
    if lam == 0:
        if b is None:
            raise DivergentIntegral("zero decay rate on an infinite interval")
        anti = poly1_antiderivative(poly)
        return ExactExp({Fraction(0): poly1_eval(anti, b) - poly1_eval(anti, a)})
    if lam < 0 and b is None:
        raise DivergentIntegral("negative decay rate on an infinite interval")

    def partial_sum(x):
        total = Fraction(0)
        deriv = poly
        power = lam
        while not poly1_is_zero(deriv):
            total += poly1_eval(deriv, x) / power
            deriv = poly1_diff(deriv)
            power *= lam
        return total

    out = ExactExp({-lam * a: partial_sum(a)})
    if b is not None:
        out = out + ExactExp({-lam * b: -partial_sum(b)})
    return out


def exact_1d_interval(poly, lam, lo, hi) -> ExactExp:
    """exact_1d allowing either endpoint to be infinite (None)."""
    if lo is not None:
        return exact_1d(poly, lam, lo, hi)
    if hi is None:
        raise DivergentIntegral("integral over the whole line with one decay rate")
    reflected = [c if i % 2 == 0 else -c for i, c in enumerate(poly)]
    return exact_1d(reflected, -fr(lam), -fr(hi), None)


def exact_weight_1d(weight, lo, hi) -> ExactExp:
    """Exact integral of a factor-free 1D weight over an interval."""
    if weight.nvars != 1:
        raise ValueError("weight is not one-dimensional")
    total = ExactExp()
    for t in weight.terms:
        if t.factors:
            raise ValueError("rational factors have no closed form here")
        piece = exact_1d_interval(t.poly.as_univariate(), t.decay[0], lo, hi)
        total = total + piece * ExactExp({-t.shift: Fraction(1)})
    return total


# -- axis-product (separable) layer ---------------------------------------------


def axis_intervals(P: Polyhedron):
    """Per-axis [lo, hi] bounds when P is an axis-aligned box/orthant.

    Returns None when some facet normal is not +-e_i.
    """
    lo = [None] * P.dim
    hi = [None] * P.dim
    for h in P.halfspaces:
        nz = [i for i, c in enumerate(h.normal) if c != 0]
        if len(nz) != 1:
            return None
        i = nz[0]
        c = h.normal[i]
        if c == 1:
            bound = -h.offset
            lo[i] = bound if lo[i] is None else max(lo[i], bound)
        elif c == -1:
            bound = h.offset
            hi[i] = bound if hi[i] is None else min(hi[i], bound)
        else:
            return None
    return list(zip(lo, hi))


def _separable_exact(P, weight) -> ExactExp | None:
    intervals = axis_intervals(P)
    if intervals is None:
        return None
    total = ExactExp()
    for t in weight.terms:
        if t.factors:
            return None
        shift_part = ExactExp({-t.shift: Fraction(1)})
        for expo, coeff in sorted(t.poly.terms.items()):
            piece = ExactExp({Fraction(0): coeff})
            for i, (lo, hi) in enumerate(intervals):
                mono = [Fraction(0)] * expo[i] + [Fraction(1)]
                piece = piece * exact_1d_interval(mono, t.decay[i], lo, hi)
            total = total + piece * shift_part
    return total


# -- simplex rule (degree 7 with nested degree 5) --------------------------------


def _gm_weights(n, m):
    """Fully symmetric simplex rule of degree 2m+1 on the standard simplex.

    Returns {barycentric point: weight}; weights integrate dx over the
    standard simplex (volume 1/n!).
    """
    s = 2 * m + 1
    out = {}
    for i in range(m + 1):
        denom = s + n - 2 * i
        coeff = (
            Fraction((-1) ** i)
            * Fraction(denom) ** s
            / (Fraction(2) ** (2 * m) * math.factorial(i) * math.factorial(s + n - i))
        )
        for beta in _compositions(m - i, n + 1):
            pt = tuple(Fraction(2 * bj + 1, denom) for bj in beta)
            out[pt] = out.get(pt, Fraction(0)) + coeff
    return out


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


class _SimplexRule:
    """Aligned degree-7/degree-5 point and weight tables for dimension n."""

    _cache = {}

    def __new__(cls, n):
        if n not in cls._cache:
            inst = super().__new__(cls)
            inst._build(n)
            cls._cache[n] = inst
        return cls._cache[n]

    def _build(self, n):
        hi = _gm_weights(n, 3)
        lo = _gm_weights(n, 2)
        points = sorted(hi)
        self.n = n
        self.bary = np.array([[float(c) for c in p] for p in points])
        nfact = math.factorial(n)
        self.w_hi = np.array([float(hi[p] * nfact) for p in points])
        self.w_lo = np.array([float(lo.get(p, 0) * nfact) for p in points])


def simplex_volume(verts):
    """Exact volume of a simplex given as a list of rational vertex tuples."""
    n = len(verts) - 1
    from .rational import det

    rows = [[verts[k + 1][i] - verts[0][i] for k in range(n)] for i in range(n)]
    d = det(rows)
    return abs(d) / math.factorial(n)


# -- deterministic triangulation --------------------------------------------------


def triangulate(P: Polyhedron):
    """Deterministic simplex decomposition of a bounded polyhedron.

    Cones the lexicographically smallest vertex over recursive facet
    triangulations; all arithmetic exact.
    """
    if not P.is_bounded():
        raise ValueError("triangulation needs a bounded polyhedron")
    verts = sorted(P.vertices())
    if not verts:
        raise ValueError("empty polyhedron")
    n = P.dim
    if n == 1:
        if len(verts) < 2:
            return []
        return [(verts[0], verts[-1])]
    if len(verts) == n + 1:
        return [tuple(verts)]
    v0 = verts[0]
    simplices = []
    for idx, h in enumerate(P.halfspaces):
        if h.value(v0) == 0:
            continue
        slc = AffineSlice.from_hyperplane(
            P, h.normal, -h.offset, skip_index=idx
        )
        if slc is None:
            continue
        for sub in triangulate(slc.domain):
            ambient = tuple(tuple(slc.embed(t)) for t in sub)
            simplex = (v0,) + ambient
            if simplex_volume(simplex) > 0:
                simplices.append(simplex)
    return simplices


# -- integrand wrapper -------------------------------------------------------------


class _Integrand:
    def __init__(self, weight, factor=None):
        self.weight = weight
        self.factor = factor

    def __call__(self, pts):
        vals = self.weight.value_array(pts)
        if self.factor is not None:
            vals = vals * np.asarray(self.factor(pts), dtype=float)
        return vals


# -- tail bounds --------------------------------------------------------------------


def _sqrt_upper(x: Fraction) -> Fraction:
    return fr(math.nextafter(math.sqrt(float(x)), math.inf))


def _sqrt_lower(x: Fraction) -> Fraction:
    r = fr(math.nextafter(math.sqrt(float(x)), 0.0))
    return r if r > 0 else fr(math.sqrt(float(x)) / 2)


def _binomial_expand(c0, c1, power):
    # coefficients of (c0 + c1*u)^power as a dense list in u
    out = [Fraction(0)] * (power + 1)
    for k in range(power + 1):
        out[k] = (
            Fraction(math.comb(power, k)) * c0 ** (power - k) * c1**k
        )
    return out


def tail_bound(P: Polyhedron, weight, delta_star, b_plus=AUTO, factor_bound=None):
    """Certified upper bound for the integral of |weight| outside the truncation.

    The bound has the envelope form C (1+u)^(d+n-1) e^(-rho u) integrated
    exactly beyond the cut <b_plus, x> = delta_star; ``factor_bound`` = (C_f,
    d_f) certifies an extra factor |g| <= C_f (1+|x|)^(d_f).
    """
    if P.is_bounded():
        return 0.0
    cone = P.recession_cone()
    if cone.lines:
        raise DivergentIntegral("integrand cannot decay along a line direction")
    if b_plus == AUTO:
        b_plus = P.auto_truncation_direction()
    b_plus = vec(b_plus)
    delta_star = fr(delta_star)
    verts = P.vertices()
    if not verts:
        raise DivergentIntegral("polyhedron has no vertices to anchor the bound")
    n = P.dim
    b0 = max(dot(b_plus, v) for v in verts)
    if delta_star < b0:
        raise ValueError("truncation must clear every vertex")
    v0 = max(_sqrt_upper(norm2(v)) for v in verts)
    kappa = Fraction(0)
    for g in cone.rays:
        pos = dot(b_plus, g)
        if pos <= 0:
            raise DivergentIntegral(
                "truncation direction does not bound the recession cone"
            )
        kappa = max(kappa, _sqrt_upper(norm2(g)) / pos)
    inv_bplus = 1 / _sqrt_lower(norm2(b_plus))
    cf, df = (fr(factor_bound[0]), int(factor_bound[1])) if factor_bound else (
        Fraction(1),
        0,
    )

    total = 0.0
    u0 = delta_star - b0
    for t in weight.terms:
        rho = None
        for g in cone.rays:
            pairing = dot(t.decay, g)
            if pairing <= 0:
                raise DivergentIntegral(
                    "weight does not decay along a recession ray",
                    ray=[float(x) for x in g],
                )
            r = Fraction(pairing, dot(b_plus, g))
            rho = r if rho is None else min(rho, r)
        a0 = min(dot(t.decay, v) for v in verts)
        c_poly = t.poly.coeff_l1()
        d = max(t.poly.degree(), 0)
        c_fac = Fraction(1)
        for base, e in t.factors:
            if base.degree() > 1:
                const = base.terms.get(tuple([0] * n), Fraction(0))
                even_nonneg = const > 0 and all(
                    c >= 0 and all(k % 2 == 0 for k in mono)
                    for mono, c in base.terms.items()
                )
                if not even_nonneg:
                    raise ValueError(
                        "tail bounds need affine or even nonnegative factor bases"
                    )
                # every monomial is >= 0 on all of R^n, so inf >= const
                c_fac *= const**e
                continue
            bvec = [
                base.terms.get(
                    tuple(1 if j == i else 0 for j in range(n)), Fraction(0)
                )
                for i in range(n)
            ]
            bc = base.terms.get(tuple([0] * n), Fraction(0))
            status, value, _ = sup_linear(
                [-x for x in bvec],
                [h.normal for h in P.halfspaces],
                [h.offset for h in P.halfspaces],
            )
            if status != OPTIMAL:
                raise DivergentIntegral("rational factor unbounded below")
            inf_base = -value + bc
            if inf_base <= 0:
                raise DivergentIntegral("rational factor reaches zero")
            c_fac *= inf_base**e
        # |x| <= v0 + kappa*u on the slab <b_plus,x> = b0 + u
        radial = _binomial_expand(v0, kappa, n - 1)
        radial = [c * 2 ** (n - 1) for c in radial]
        growth = _binomial_expand(1 + v0, kappa, d + df)
        envelope = poly1_mul(radial, growth)
        scale = inv_bplus * c_poly * cf * c_fac
        piece = exact_1d(envelope, rho, u0, None)
        piece = piece * ExactExp({-a0 - t.shift: scale})
        total += abs(float(piece)) * (1 + 1e-9)
    return total


# -- adaptive engine ----------------------------------------------------------------


def _bisect(verts):
    n = len(verts) - 1
    longest = None
    pair = None
    for i in range(n + 1):
        for j in range(i + 1, n + 1):
            d2 = sum((a - b) ** 2 for a, b in zip(verts[i], verts[j]))
            if longest is None or d2 > longest:
                longest = d2
                pair = (i, j)
    i, j = pair
    mid = tuple((a + b) / 2 for a, b in zip(verts[i], verts[j]))
    return (
        tuple(mid if k == i else v for k, v in enumerate(verts)),
        tuple(mid if k == j else v for k, v in enumerate(verts)),
    )


def _integrate_simplices(
    integrand,
    simplices,
    rel_tol,
    abs_tol,
    tail,
    cell_cap,
    workers,
):
    """Adaptive refinement; all floating work batched and order-fixed."""
    n = len(simplices[0]) - 1
    rule = _SimplexRule(n)
    npts = rule.bary.shape[0]

    def evaluate_batch(batch):
        vols = np.array([float(simplex_volume(v)) for v in batch])
        vmats = np.array(
            [[[float(c) for c in vtx] for vtx in verts] for verts in batch]
        )
        pts = np.einsum("kj,cjn->ckn", rule.bary, vmats).reshape(-1, n)
        if workers > 1 and pts.shape[0] >= workers:
            chunks = np.array_split(pts, workers)
            with ThreadPoolExecutor(max_workers=workers) as pool:
                vals = np.concatenate(list(pool.map(integrand, chunks)))
        else:
            vals = integrand(pts)
        vals = vals.reshape(len(batch), npts)
        q_hi = vols * (vals @ rule.w_hi)
        q_lo = vols * (vals @ rule.w_lo)
        errs = 1.5 * np.abs(q_hi - q_lo) + 1e-16 * np.abs(q_hi)
        return q_hi, errs

    cells = []  # (id, verts, q, err); ids increase with creation order
    counter = 0
    q0, e0 = evaluate_batch(simplices)
    for verts, q, e in zip(simplices, q0, e0):
        cells.append((counter, verts, float(q), float(e)))
        counter += 1

    while True:
        ordered = sorted(cells, key=lambda c: c[0])
        value = pairwise_sum([c[2] for c in ordered])
        err_total = pairwise_sum([c[3] for c in ordered])
        budget = max(abs_tol, rel_tol * abs(value))
        if err_total + tail <= budget:
            return value, err_total, len(cells), "ok"
        if tail > 0.75 * budget:
            # no amount of interior refinement can close the gap
            return value, err_total, len(cells), "tail"
        if len(cells) >= cell_cap:
            return value, err_total, len(cells), "cells"
        # refine every cell holding more than its share of the gap
        share = max((budget - tail) / (4 * len(cells)), 0.0)
        by_err = sorted(cells, key=lambda c: (-c[3], c[0]))
        n_refine = max(1, min(len(cells), cell_cap - len(cells)))
        chosen = [c for c in by_err[:n_refine] if c[3] > share]
        if not chosen:
            chosen = by_err[:1]
        chosen_ids = {c[0] for c in chosen}
        keep = [c for c in cells if c[0] not in chosen_ids]
        children = []
        for _, verts, _, _ in sorted(chosen, key=lambda c: c[0]):
            children.extend(_bisect(verts))
        qs, es = evaluate_batch(children)
        for verts, q, e in zip(children, qs, es):
            keep.append((counter, verts, float(q), float(e)))
            counter += 1
        cells = keep


def _check_decay(P, weight):
    cone = P.recession_cone()
    if cone.is_trivial():
        return
    if cone.lines:
        raise DivergentIntegral("recession cone has a line; no decay possible")
    for t in weight.terms:
        for g in cone.rays:
            if dot(t.decay, g) <= 0:
                raise DivergentIntegral(
                    "weight does not decay along a recession ray",
                    ray=[float(x) for x in g],
                )


def integrate_interior(
    P: Polyhedron,
    weight,
    rel_tol=DEFAULT_REL_TOL,
    abs_tol=0.0,
    method="auto",
    factor=None,
    factor_bound=None,
    b_plus=AUTO,
    delta_star=None,
    workers=1,
    cell_cap=100000,
) -> IntegralResult:
    """Integral of weight (optionally times a smooth factor) over P.

    method: "auto" tries exact closed forms first; "exact" requires them;
    "adaptive" forces the simplex engine.  Exact results carry the rational
    e^q representation in .exact.

    The error contract is value within abs_error_bound + tail_bound of the
    true integral; the budget is max(abs_tol, rel_tol*|value|).
    """
    if factor is None and method in ("auto", "exact"):
        exact = None
        if P.dim == 1:
            iv = axis_intervals(P)
            if iv is not None and not any(t.factors for t in weight.terms):
                lo, hi = iv[0]
                if hi is None:
                    _check_decay(P, weight)
                exact = exact_weight_1d(weight, lo, hi)
        if exact is None:
            if not P.is_bounded():
                _check_decay(P, weight)
            exact = _separable_exact(P, weight)
        if exact is not None:
            return IntegralResult(
                value=float(exact),
                abs_error_bound=0.0,
                tail_bound=0.0,
                cells_used=0,
                converged=True,
                exact=exact,
            )
        if method == "exact":
            raise ValueError("no exact closed form for this domain/integrand")

    integrand = _Integrand(weight, factor)
    if factor is not None and factor_bound is None and not P.is_bounded():
        raise ValueError(
            "unbounded integration with a raw factor needs factor_bound"
        )

    if P.is_bounded():
        simplices = triangulate(P)
        value, err, cells, status = _integrate_simplices(
            integrand, simplices, rel_tol, abs_tol, 0.0, cell_cap, workers
        )
        result = IntegralResult(value, err, 0.0, cells, status == "ok")
        if status != "ok":
            raise ToleranceNotMet(
                "cell budget exhausted before meeting tolerance",
                partial=result,
            )
        return result

    _check_decay(P, weight)
    if b_plus == AUTO:
        b_plus = P.auto_truncation_direction()
    b_plus = vec(b_plus)
    b0 = max(dot(b_plus, v) for v in P.vertices())
    if delta_star is not None:
        schedule = [fr(delta_star)]
    else:
        schedule = []
        d = max(fr(8), b0 + 4)
        while d <= _DELTA_CAP:
            schedule.append(d)
            d = d * 2
    result = None
    for d_star in schedule:
        tail = tail_bound(P, weight, d_star, b_plus, factor_bound)
        trunc = P.truncate(b_plus, d_star)
        simplices = triangulate(trunc)
        value, err, cells, status = _integrate_simplices(
            integrand, simplices, rel_tol, abs_tol, tail, cell_cap, workers
        )
        result = IntegralResult(value, err, tail, cells, status == "ok")
        if status == "ok":
            return result
        if status == "cells":
            raise ToleranceNotMet(
                "cell budget exhausted before meeting tolerance",
                partial=result,
            )
        # tail-limited: enlarge the truncation and try again
    raise ToleranceNotMet(
        "tail bound does not meet the budget within the truncation cap",
        partial=result,
    )


def _pullback_factor(slc: AffineSlice, factor):
    if factor is None:
        return None
    point = np.array([float(c) for c in slc.point])
    basis = np.array([[float(c) for c in b] for b in slc.basis])

    def pulled(ts):
        ts = np.asarray(ts, dtype=float)
        return factor(point[None, :] + ts @ basis)

    return pulled


def integrate_slice(
    slc: AffineSlice,
    weight,
    rel_tol=DEFAULT_REL_TOL,
    abs_tol=0.0,
    method="auto",
    factor=None,
    factor_bound=None,
    workers=1,
    cell_cap=100000,
) -> IntegralResult:
    """Integral over one measure-true slice (facet or crease chart)."""
    scale = slc.measure_scale
    if slc.domain is None:
        exact = weight.value_exact(slc.point) * ExactExp({Fraction(0): scale})
        value = float(exact)
        if factor is not None:
            fval = float(
                np.asarray(
                    factor(np.array([[float(c) for c in slc.point]]))
                ).reshape(-1)[0]
            )
            value *= fval
            exact = None
        return IntegralResult(value, 0.0, 0.0, 0, True, exact=exact)
    matrix = [
        [slc.basis[j][i] for j in range(len(slc.basis))]
        for i in range(len(slc.point))
    ]
    restricted = weight.pullback_affine(matrix, slc.point, domain=slc.domain)
    inner = integrate_interior(
        slc.domain,
        restricted,
        rel_tol=rel_tol,
        abs_tol=abs_tol / float(scale) if abs_tol else 0.0,
        method=method,
        factor=_pullback_factor(slc, factor),
        factor_bound=factor_bound,
        workers=workers,
        cell_cap=cell_cap,
    )
    fscale = float(scale)
    return IntegralResult(
        value=inner.value * fscale,
        abs_error_bound=inner.abs_error_bound * fscale,
        tail_bound=inner.tail_bound * fscale,
        cells_used=inner.cells_used,
        converged=inner.converged,
        exact=None
        if inner.exact is None
        else inner.exact * ExactExp({Fraction(0): scale}),
    )


def integrate_boundary(
    P: Polyhedron,
    weight,
    rel_tol=DEFAULT_REL_TOL,
    abs_tol=0.0,
    method="auto",
    factor=None,
    factor_bound=None,
    workers=1,
    cell_cap=100000,
) -> IntegralResult:
    """Sum of facet integrals with the lattice-normalized surface measure."""
    atlas = P.facet_atlas()
    per_facet_abs = abs_tol / max(len(atlas), 1)
    value = []
    err = []
    tail = []
    cells = 0
    exact = ExactExp()
    exact_ok = True
    converged = True
    for slc in atlas:
        res = integrate_slice(
            slc,
            weight,
            rel_tol=rel_tol,
            abs_tol=per_facet_abs,
            method=method,
            factor=factor,
            factor_bound=factor_bound,
            workers=workers,
            cell_cap=cell_cap,
        )
        value.append(res.value)
        err.append(res.abs_error_bound)
        tail.append(res.tail_bound)
        cells += res.cells_used
        converged = converged and res.converged
        if res.exact is None:
            exact_ok = False
        else:
            exact = exact + res.exact
    return IntegralResult(
        value=pairwise_sum(value),
        abs_error_bound=pairwise_sum(err),
        tail_bound=pairwise_sum(tail),
        cells_used=cells,
        converged=converged,
        exact=exact if exact_ok else None,
    )


def integrate_crease(crease, weight, **kwargs) -> IntegralResult:
    """Integral over a crease with its 1/|delta_b| measure."""
    slc = getattr(crease, "slice", crease)
    return integrate_slice(slc, weight, **kwargs)
