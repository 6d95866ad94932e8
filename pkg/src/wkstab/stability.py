"""Weighted Futaki invariants, destabilizer scans, and crease-sum checks.

The invariant of a convex test function f is

    F(f) = 2 * integral_{boundary} f v dsigma  -  integral f w dx.

Piecewise-linear f are integrated region by region so every piece stays in
the exact weight ring whenever closed forms exist; symplectic potentials go
through the adaptive engine with certified growth envelopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import EmptyFamily, NotASolution, ToleranceNotMet, ZeroDenominator
from .geometry import HalfSpace, Polyhedron
from .pl import (
    PiecewiseLinearConvex,
    f_R,
    f_x0,
    is_admissible,
    normalize_star,
    regions_and_creases,
    simple_crease,
)
from .polynomials import Polynomial
from .potentials import (
    SymplecticPotential,
    _slice_adjusted_bound,
    abreu_scal_v,
    potential_growth_bound,
)
from .quadrature import (
    DEFAULT_REL_TOL,
    IntegralResult,
    integrate_boundary,
    integrate_interior,
    integrate_slice,
)
from .rational import ExactExp, fr, primitivize, vec
from .weights import AffineForm, Weight, WeightTerm, _sample_points, soliton_weight_w

__all__ = [
    "StabilityVerdict",
    "SolitonIdentityReport",
    "crease_identity_check",
    "find_c_lambda",
    "futaki",
    "futaki_affine",
    "futaki_v_vector",
    "normalize_w_scale",
    "semistability_scan",
    "soliton_futaki_identity_check",
    "uniform_lambda_estimate",
]

_ZERO = IntegralResult(0.0, 0.0, 0.0, 0, True, exact=ExactExp())


def _combine(parts):
    """Sum integral results; the exact field survives only if every part has one."""
    if not parts:
        return _ZERO
    value = math.fsum(p.value for p in parts)
    err = math.fsum(p.abs_error_bound for p in parts)
    tail = math.fsum(p.tail_bound for p in parts)
    cells = sum(p.cells_used for p in parts)
    converged = all(p.converged for p in parts)
    exact = ExactExp()
    for p in parts:
        if p.exact is None:
            exact = None
            break
        exact = exact + p.exact
    return IntegralResult(value, err, tail, cells, converged, exact=exact)


def _pruned(f, P):
    return PiecewiseLinearConvex(f.pieces, polyhedron=P, prune=True)


def _pl_interior(P, f, weight, rel_tol, abs_tol, method, workers):
    """integral of f * weight over P, split over the maximizer regions of f."""
    fp = _pruned(f, P)
    regions, _ = regions_and_creases(fp, P)
    per_abs = abs_tol / max(len(regions), 1)
    parts = []
    for a, region in regions:
        piece = fp.pieces[a]
        wf = weight * Weight.from_polynomial(piece.as_polynomial())
        if wf.is_zero():
            parts.append(_ZERO)
            continue
        parts.append(
            integrate_interior(
                region,
                wf,
                rel_tol=rel_tol,
                abs_tol=per_abs,
                method=method,
                workers=workers,
            )
        )
    return _combine(parts)


def _pl_slice(slc, f, weight, rel_tol, abs_tol, method, workers):
    """integral of f * weight over one slice chart, exact when the chart is."""
    if slc.domain is None:
        fval = f.value_exact(slc.point)
        exact = weight.value_exact(slc.point) * ExactExp(
            {Fraction(0): slc.measure_scale * fval}
        )
        return IntegralResult(float(exact), 0.0, 0.0, 0, True, exact=exact)
    n = len(slc.point)
    matrix = [
        [slc.basis[j][i] for j in range(len(slc.basis))] for i in range(n)
    ]
    restricted = []
    for p in f.pieces:
        bt = [
            sum(p.b[i] * slc.basis[j][i] for i in range(n))
            for j in range(len(slc.basis))
        ]
        ct = sum(p.b[i] * slc.point[i] for i in range(n)) + p.c
        restricted.append(AffineForm(bt, ct))
    ft = PiecewiseLinearConvex(restricted, polyhedron=slc.domain, prune=True)
    wt = weight.pullback_affine(matrix, slc.point, domain=slc.domain)
    regions, _ = regions_and_creases(ft, slc.domain)
    scale = float(slc.measure_scale)
    per_abs = abs_tol / scale / max(len(regions), 1) if abs_tol else 0.0
    parts = []
    for a, region in regions:
        piece = ft.pieces[a]
        wf = wt * Weight.from_polynomial(piece.as_polynomial())
        if wf.is_zero():
            parts.append(_ZERO)
            continue
        parts.append(
            integrate_interior(
                region,
                wf,
                rel_tol=rel_tol,
                abs_tol=per_abs,
                method=method,
                workers=workers,
            )
        )
    inner = _combine(parts)
    return IntegralResult(
        value=inner.value * scale,
        abs_error_bound=inner.abs_error_bound * scale,
        tail_bound=inner.tail_bound * scale,
        cells_used=inner.cells_used,
        converged=inner.converged,
        exact=None
        if inner.exact is None
        else inner.exact * ExactExp({Fraction(0): slc.measure_scale}),
    )


def _pl_boundary(P, f, weight, rel_tol, abs_tol, method, workers):
    atlas = P.facet_atlas()
    per_abs = abs_tol / max(len(atlas), 1)
    fp = _pruned(f, P)
    return _combine(
        [
            _pl_slice(slc, fp, weight, rel_tol, per_abs, method, workers)
            for slc in atlas
        ]
    )


def futaki(
    P: Polyhedron,
    v: Weight,
    w: Weight,
    f,
    rel_tol=DEFAULT_REL_TOL,
    abs_tol=1e-9,
    method="auto",
    workers=1,
    factor_bound=None,
) -> IntegralResult:
    """F(f) = 2 boundary(f v) - interior(f w).

    f is either a PiecewiseLinearConvex (region-by-region, exact closed
    forms when available) or a SymplecticPotential (adaptive with a
    certified quadratic growth envelope).
    """
    if isinstance(f, SymplecticPotential):
        bound = factor_bound if factor_bound is not None else potential_growth_bound(f)
        atlas = P.facet_atlas()
        per_abs = abs_tol / 4.0 / max(len(atlas), 1)
        bparts = [
            integrate_slice(
                slc,
                v,
                rel_tol=rel_tol,
                abs_tol=per_abs,
                method=method,
                factor=f.value_array,
                factor_bound=_slice_adjusted_bound(bound, slc),
                workers=workers,
            )
            for slc in atlas
        ]
        bnd = _combine(bparts)
        inner = integrate_interior(
            P,
            w,
            rel_tol=rel_tol,
            abs_tol=abs_tol / 2.0,
            method=method,
            factor=f.value_array,
            factor_bound=bound,
            workers=workers,
        )
    else:
        bnd = _pl_boundary(P, f, v, rel_tol, abs_tol / 4.0, method, workers)
        inner = _pl_interior(P, f, w, rel_tol, abs_tol / 2.0, method, workers)
    exact = None
    if bnd.exact is not None and inner.exact is not None:
        exact = bnd.exact * Fraction(2) - inner.exact
    return IntegralResult(
        value=2.0 * bnd.value - inner.value,
        abs_error_bound=2.0 * bnd.abs_error_bound + inner.abs_error_bound,
        tail_bound=2.0 * bnd.tail_bound + inner.tail_bound,
        cells_used=bnd.cells_used + inner.cells_used,
        converged=bnd.converged and inner.converged,
        exact=exact,
    )


def _affine_probes(n):
    one = PiecewiseLinearConvex([AffineForm([0] * n, 1)], prune=False)
    coords = [
        PiecewiseLinearConvex(
            [AffineForm([1 if j == i else 0 for j in range(n)], 0)],
            prune=False,
        )
        for i in range(n)
    ]
    return [one] + coords


def futaki_affine(
    P, v, w, rel_tol=DEFAULT_REL_TOL, abs_tol=1e-10, method="auto", workers=1
):
    """(F(1), F(x^1), ..., F(x^n)); all should vanish when a solution exists."""
    return [
        futaki(P, v, w, probe, rel_tol, abs_tol, method, workers)
        for probe in _affine_probes(P.dim)
    ]


def futaki_v_vector(
    P, v, rel_tol=DEFAULT_REL_TOL, abs_tol=1e-10, method="auto", workers=1
):
    """The vector (integral of x_i v dx); zero is necessary for a v-soliton."""
    out = []
    for i in range(P.dim):
        wi = v * Weight.from_polynomial(Polynomial.variable(i, P.dim))
        out.append(
            integrate_interior(
                P, wi, rel_tol=rel_tol, abs_tol=abs_tol, method=method, workers=workers
            )
        )
    return out


@dataclass
class SolitonIdentityReport:
    holds: bool
    anticanonical: bool
    consistent: bool
    probes: list

    def to_dict(self):
        return {
            "holds": self.holds,
            "anticanonical": self.anticanonical,
            "consistent": self.consistent,
            "probes": self.probes,
        }


def soliton_futaki_identity_check(
    P: Polyhedron,
    v: Weight,
    rel_tol=1e-10,
    abs_tol=1e-12,
    tol=1e-8,
    method="auto",
    workers=1,
) -> SolitonIdentityReport:
    """Probe the divergence identity behind the soliton weight.

    For affine l = <b,x> + c and w = soliton_weight_w(v), Stokes applied to
    l v (sum_j (-1)^(j+1) x^j dx^1 ... hat j ... dx^n) gives

        integral l w dx = 2 boundary(l v) - 2 integral <b,x> v dx

    exactly when every facet offset is 1; only the homogeneous part of l
    enters the last term (d(l) wedge the contraction form restores <b,x>,
    not l).  Probes are {1, x^1, ..., x^n}.  Equality on the finite probe
    set is necessary, not sufficient, so the report cross-checks the
    polyhedron's offsets and flags disagreement instead of resolving it.
    """
    n = P.dim
    w = soliton_weight_w(v)
    probes = []
    holds = True
    labels = ["1"] + [f"x{i + 1}" for i in range(n)]
    for label, probe in zip(labels, _affine_probes(n)):
        piece = probe.pieces[0]
        lhs = _pl_interior(P, probe, w, rel_tol, abs_tol, method, workers)
        bnd = _pl_boundary(P, probe, v, rel_tol, abs_tol, method, workers)
        homog = PiecewiseLinearConvex([AffineForm(piece.b, 0)], prune=False)
        lin = _pl_interior(P, homog, v, rel_tol, abs_tol, method, workers)
        residual = lhs.value - 2.0 * bnd.value + 2.0 * lin.value
        err = (
            lhs.total_error() + 2.0 * bnd.total_error() + 2.0 * lin.total_error()
        )
        scale = max(1.0, abs(lhs.value), 2.0 * abs(bnd.value), 2.0 * abs(lin.value))
        ok = abs(residual) <= max(tol * scale, 4.0 * err)
        holds = holds and ok
        probes.append(
            {
                "probe": label,
                "lhs": lhs.value,
                "rhs": 2.0 * bnd.value - 2.0 * lin.value,
                "residual": residual,
                "holds": ok,
            }
        )
    anticanonical = P.is_anticanonical()
    return SolitonIdentityReport(
        holds=holds,
        anticanonical=anticanonical,
        consistent=holds == anticanonical,
        probes=probes,
    )


def normalize_w_scale(
    P, v, w, rel_tol=1e-10, abs_tol=1e-12, method="auto", workers=1
) -> float:
    """a with F_{v, a w}(1) = 0, i.e. a = 2 boundary(v) / interior(w)."""
    den = integrate_interior(
        P, w, rel_tol=rel_tol, abs_tol=abs_tol, method=method, workers=workers
    )
    if abs(den.value) <= max(4.0 * den.total_error(), 1e-300):
        raise ZeroDenominator("interior integral of w vanishes within tolerance")
    num = integrate_boundary(
        P, v, rel_tol=rel_tol, abs_tol=abs_tol, method=method, workers=workers
    )
    return 2.0 * num.value / den.value


def _half_line_weight(c, lam):
    x = Polynomial.variable(0, 1)
    base = x**4 + Polynomial.constant(1, fr(c))
    return Weight(1, [WeightTerm(x, ((base, -1),), (fr(lam),))])


def find_c_lambda(
    lam,
    lo=1e-6,
    hi=1e6,
    residual_tol=1e-8,
    rel_tol=1e-8,
    max_iter=200,
    workers=1,
):
    """Root of c -> integral_{-1}^inf x (c + x^4)^(-1) e^(-lam x) dx.

    Scans a geometric grid for a sign change, then bisects until the
    integral at the returned c is below residual_tol.  Returns None when no
    sign change shows up in [lo, hi] (reported, not fatal: the scan range
    may simply miss the root).
    """
    P1 = Polyhedron(1, [HalfSpace.from_rational([1], 1)])
    quad_abs = residual_tol / 20.0

    def g(c):
        res = integrate_interior(
            P1,
            _half_line_weight(c, lam),
            rel_tol=rel_tol,
            abs_tol=quad_abs,
            workers=workers,
        )
        return res.value

    grid = []
    c = float(lo)
    while c < float(hi) * (1 + 1e-12):
        grid.append(c)
        c *= 10.0
    vals = [g(c) for c in grid]
    bracket = None
    for a, b, ga, gb in zip(grid, grid[1:], vals, vals[1:]):
        if ga == 0.0:
            return a
        if ga * gb < 0:
            bracket = (a, b, ga, gb)
            break
    if bracket is None:
        if vals and vals[-1] == 0.0:
            return grid[-1]
        return None
    a, b, ga, gb = bracket
    best = (abs(ga), a) if abs(ga) < abs(gb) else (abs(gb), b)
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        gm = g(mid)
        if abs(gm) < best[0]:
            best = (abs(gm), mid)
        if abs(gm) < residual_tol * 0.5:
            return mid
        if ga * gm < 0:
            b, gb = mid, gm
        else:
            a, ga = mid, gm
        if b - a <= 1e-14 * max(1.0, abs(a)):
            break
    return best[1]


@dataclass
class StabilityVerdict:
    kind: str
    f: PiecewiseLinearConvex | None = None
    value: float | None = None
    error: float | None = None
    affine: list | None = None
    search_log: list = field(default_factory=list)

    def to_dict(self):
        return {
            "kind": self.kind,
            "destabilizer": None if self.f is None else self.f.to_json(),
            "value": self.value,
            "error": self.error,
            "affine": self.affine,
            "search_log": self.search_log,
        }


def _scan_directions(P):
    """Deterministic primitive slope candidates: axes, normals, rays, sums."""
    n = P.dim
    seen = []
    seen_set = set()

    def push(d):
        d = [fr(x) for x in d]
        if all(x == 0 for x in d):
            return
        p = primitivize(d)
        if p not in seen_set:
            seen_set.add(p)
            seen.append(p)

    for i in range(n):
        e = [0] * n
        e[i] = 1
        push(e)
        push([-x for x in e])
    rays = P.recession_cone().rays
    for gdir in rays:
        push(gdir)
        push([-x for x in gdir])
    for i in range(len(rays)):
        for j in range(i + 1, len(rays)):
            push([a + b for a, b in zip(rays[i], rays[j])])
    for h in P.halfspaces:
        push(h.normal)
        push([-x for x in h.normal])
    if n == 2:
        for i in (-2, -1, 1, 2):
            for j in (-2, -1, 1, 2):
                push([i, j])
    return seen


def _ray_directions(P):
    rays = list(P.recession_cone().rays)
    out = [vec(g) for g in rays]
    if len(rays) > 1:
        total = [sum(g[i] for g in rays) for i in range(P.dim)]
        if any(x != 0 for x in total):
            out.append(vec(total))
    return out


def _log_entry(family, params, res):
    return {
        "family": family,
        "params": params,
        "value": res.value,
        "error": res.total_error(),
    }


def semistability_scan(
    P: Polyhedron,
    v: Weight,
    w: Weight,
    families=("f_R", "simple_crease"),
    budget=64,
    rel_tol=1e-6,
    abs_tol=1e-8,
    tol=0.0,
    affine_tol=1e-8,
    method="auto",
    workers=1,
) -> StabilityVerdict:
    """One-sided destabilizer search over parameterized convex PL families.

    Affine probes run first; a component exceeding affine_tol relative to
    the mass of the cancelling integrals is an AffineObstruction.  Then F
    is minimized over the ray family max{<g,x>-R, 0} and simple creases
    max{<b,x>+a, 0} (slopes from a deterministic primitive-direction
    sample, offsets gridded then refined by golden section).  The interior
    integral of each candidate is resolved against the size of its own
    boundary term, since far-out destabilizers live at the scale where the
    two nearly cancel.  A candidate with F < -tol and the whole error
    interval negative is re-certified at tighter tolerance; candidates the
    tail machinery cannot resolve are logged and skipped.
    NoDestabilizerFound never claims stability.  The scan is deterministic:
    identical verdicts and logs for any worker count.
    """
    log = []
    # the vanishing tolerance is relative to the size of the two integrals
    # that cancel inside F, not to the near-zero F values themselves
    bmass = integrate_boundary(
        P, v, rel_tol=1e-6, abs_tol=1e-9, method=method, workers=workers
    )
    imass = integrate_interior(
        P, w, rel_tol=1e-6, abs_tol=1e-9, method=method, workers=workers
    )
    scale = max(1.0, 2.0 * abs(bmass.value) + abs(imass.value))
    probe_abs = max(1e-10, affine_tol * scale / 20.0)
    affine = futaki_affine(
        P, v, w, rel_tol=min(rel_tol, 1e-8), abs_tol=probe_abs, workers=workers
    )
    aff_vec = [r.value for r in affine]
    for k, r in enumerate(affine):
        log.append(_log_entry("affine", {"probe": k}, r))
    if any(
        abs(r.value) > max(affine_tol * scale, 4.0 * r.total_error())
        for r in affine
    ):
        return StabilityVerdict(
            kind="AffineObstruction", affine=aff_vec, search_log=log
        )

    def evaluate(f, frac=0.05, floor=1e-15):
        bnd = _pl_boundary(
            P, f, v, min(rel_tol, 1e-8), abs_tol / 4.0, method, workers
        )
        target = min(
            abs_tol,
            max(floor, frac * abs(2.0 * bnd.value), 4.0 * bnd.total_error()),
        )
        inner = _pl_interior(P, f, w, rel_tol, target, method, workers)
        exact = None
        if bnd.exact is not None and inner.exact is not None:
            exact = bnd.exact * Fraction(2) - inner.exact
        return IntegralResult(
            value=2.0 * bnd.value - inner.value,
            abs_error_bound=2.0 * bnd.abs_error_bound + inner.abs_error_bound,
            tail_bound=2.0 * bnd.tail_bound + inner.tail_bound,
            cells_used=bnd.cells_used + inner.cells_used,
            converged=bnd.converged and inner.converged,
            exact=exact,
        )

    def certify(f, family, params):
        try:
            res = evaluate(f, frac=0.0025, floor=1e-16)
        except ToleranceNotMet:
            log.append(
                {
                    "family": family + ":certify",
                    "params": params,
                    "value": None,
                    "error": None,
                    "note": "tolerance not met",
                }
            )
            return None
        log.append(_log_entry(family + ":certify", params, res))
        if res.value < -tol and res.value + 2.0 * res.total_error() < 0:
            return StabilityVerdict(
                kind="Destabilizer",
                f=f,
                value=res.value,
                error=res.total_error(),
                affine=aff_vec,
                search_log=log,
            )
        return None

    evals = 0
    best = None  # (value, family, params, f)

    def consider(f, family, params):
        nonlocal evals, best
        evals += 1
        try:
            res = evaluate(f)
        except ToleranceNotMet:
            log.append(
                {
                    "family": family,
                    "params": params,
                    "value": None,
                    "error": None,
                    "note": "tolerance not met",
                }
            )
            return None
        log.append(_log_entry(family, params, res))
        if best is None or res.value < best[0]:
            best = (res.value, family, params, f)
        if res.value < -tol and res.value + 4.0 * res.total_error() < 0:
            return certify(f, family, params)
        return None

    if "f_R" in families:
        for gdir in _ray_directions(P):
            for R in (1, 2, 4, 8, 16, 24, 32, 40, 48, 64):
                if evals >= budget:
                    break
                verdict = consider(
                    f_R(gdir, R),
                    "f_R",
                    {"direction": [str(x) for x in gdir], "R": R},
                )
                if verdict is not None:
                    return verdict

    if "simple_crease" in families:
        offsets = (-4, -2, -1, 0, 1, 2, 4)
        for b in _scan_directions(P):
            if evals >= budget:
                break
            for a in offsets:
                if evals >= budget:
                    break
                f = simple_crease(b, a)
                if not is_admissible(f, P):
                    continue
                verdict = consider(
                    f,
                    "simple_crease",
                    {"b": [str(x) for x in b], "a": a},
                )
                if verdict is not None:
                    return verdict
        # golden-section refinement of the offset at the best crease slope
        if best is not None and best[1] == "simple_crease" and evals < budget:
            b = [fr(x) for x in best[3].pieces[0].b]
            a0 = float(best[3].pieces[0].c)
            lo, hi = a0 - 2.0, a0 + 2.0
            phi = (math.sqrt(5.0) - 1.0) / 2.0
            x1 = hi - phi * (hi - lo)
            x2 = lo + phi * (hi - lo)

            def fval(a):
                nonlocal evals
                f = simple_crease(b, fr(a))
                evals += 1
                try:
                    res = evaluate(f)
                except ToleranceNotMet:
                    return math.inf, f
                log.append(
                    _log_entry(
                        "refine", {"b": [str(x) for x in b], "a": a}, res
                    )
                )
                return res.value, f

            v1, f1 = fval(x1)
            v2, f2 = fval(x2)
            for _ in range(10):
                if evals >= budget:
                    break
                if v1 <= v2:
                    hi, x2, v2 = x2, x1, v1
                    x1 = hi - phi * (hi - lo)
                    v1, f1 = fval(x1)
                else:
                    lo, x1, v1 = x1, x2, v2
                    x2 = lo + phi * (hi - lo)
                    v2, f2 = fval(x2)
            for val, f in ((v1, f1), (v2, f2)):
                if val < -tol and val < (best[0] if best else 0.0):
                    verdict = certify(
                        f, "refine", {"a": float(f.pieces[0].c)}
                    )
                    if verdict is not None:
                        return verdict
                    break

    return StabilityVerdict(
        kind="NoDestabilizerFound", affine=aff_vec, search_log=log
    )


def _weight_power(v: Weight, r):
    """(weight, factor, factor_bound) with weight*factor = v^r.

    Exact for r = 1; otherwise v must be a single poly*exp term, and the
    polynomial part (assumed positive on the domain) moves into a callable
    factor p(x)^r with envelope |p|^r <= (l1 coeff)^r (1+|x|)^(ceil(d r)).
    """
    r = float(r)
    if r == 1.0:
        return v, None, None
    if len(v.terms) != 1 or v.terms[0].factors:
        raise ValueError("weight powers support single poly*exp terms only")
    t = v.terms[0]
    decay = tuple(fr(r) * d for d in t.decay)
    shift = fr(r) * t.shift
    poly = t.poly
    if poly.degree() <= 0:
        cval = float(poly.coeff_l1())
        coeff = fr(cval**r)
        wgt = Weight(v.nvars, [WeightTerm(Polynomial.constant(v.nvars, coeff), (), decay, shift)])
        return wgt, None, None
    wgt = Weight(
        v.nvars,
        [WeightTerm(Polynomial.constant(v.nvars, 1), (), decay, shift)],
    )

    def factor(pts):
        return v_poly_vals(pts) ** r

    polyv = poly

    def v_poly_vals(pts):
        return polyv.eval_array(pts)

    cf = float(poly.coeff_l1()) ** r
    df = math.ceil(max(poly.degree(), 0) * r)
    return wgt, factor, (fr(cf * (1 + 1e-9)), int(df))


def _family_integral(P, f, wgt, factor, factor_bound, rel_tol, abs_tol, workers):
    if factor is None:
        return _pl_interior(P, f, wgt, rel_tol, abs_tol, "auto", workers)
    fp = _pruned(f, P)
    regions, _ = regions_and_creases(fp, P)
    parts = []
    for a, region in regions:
        piece = fp.pieces[a]
        if all(x == 0 for x in piece.b) and piece.c == 0:
            continue
        pb = np.array([float(x) for x in piece.b])
        pc = float(piece.c)

        def piece_factor(pts, _pb=pb, _pc=pc):
            return factor(pts) * (pts @ _pb + _pc)

        cf, df = factor_bound
        pf_bound = (
            fr(float(cf) * (float(sum(abs(x) for x in piece.b)) + abs(pc) + 1.0)),
            int(df) + 1,
        )
        parts.append(
            integrate_interior(
                region,
                wgt,
                rel_tol=rel_tol,
                abs_tol=abs_tol / max(len(regions), 1),
                factor=piece_factor,
                factor_bound=pf_bound,
                workers=workers,
            )
        )
    return _combine(parts)


def uniform_lambda_estimate(
    P: Polyhedron,
    v: Weight,
    w: Weight,
    beta,
    gamma,
    K,
    family=None,
    budget=40,
    delta_grid=(2, 4, 8),
    rel_tol=1e-8,
    abs_tol=1e-10,
    tol=1e-9,
    workers=1,
) -> float:
    """min over the sampled family of F(f*) / integral f* v^gamma dx.

    Star-normalizes every sample, drops those that normalize to zero or
    fail the tail-mass test (delta * integral of f* v^beta outside the
    delta-truncation must stay <= K on the grid), and returns the smallest
    ratio: an upper bound for the uniform stability constant.
    """
    if gamma < beta:
        raise ValueError("gamma must be at least beta")
    n = P.dim
    if family is None:
        if n == 1:
            family = [f_x0(Fraction(t, 2)) for t in range(0, 9)]
        else:
            family = []
            for b in _scan_directions(P):
                for a in (-2, -1, 0, 1, 2):
                    family.append(simple_crease(b, a))
    family = list(family)[: int(budget)]
    wb, bfactor, bbound = _weight_power(v, beta)
    wg, gfactor, gbound = _weight_power(v, gamma)
    ratios = []
    for f in family:
        fstar = normalize_star(f, P)
        if all(
            all(x == 0 for x in p.b) and p.c == 0 for p in fstar.pieces
        ):
            continue
        total = _family_integral(
            P, fstar, wb, bfactor, bbound, rel_tol, abs_tol, workers
        )
        member = True
        for delta in delta_grid:
            Q = P.truncate(delta_star=fr(delta))
            trunc = _family_integral(
                Q, fstar, wb, bfactor, bbound, rel_tol, abs_tol, workers
            )
            tail_mass = max(total.value - trunc.value, 0.0)
            if float(delta) * tail_mass > float(K):
                member = False
                break
        if not member:
            continue
        den = _family_integral(
            P, fstar, wg, gfactor, gbound, rel_tol, abs_tol, workers
        )
        if den.value <= max(tol, 4.0 * den.total_error()):
            continue
        num = futaki(P, v, w, fstar, rel_tol=rel_tol, abs_tol=abs_tol, workers=workers)
        ratios.append(num.value / den.value)
    if not ratios:
        raise EmptyFamily("no admissible normalized samples in the family")
    return min(ratios)


def _crease_form_bound(u: SymplecticPotential, delta_b):
    """Certified (C, 1) envelope for the crease form <db, H db> along a slice.

    Valid for potentials whose log coefficients are all positive and whose
    smooth part contributes a positive semidefinite Hessian (affine parts
    do): each log term bounds the metric from below after dividing by the
    linear growth of its argument, so H grows at most linearly.
    """
    n = u.nvars
    G0 = np.zeros((n, n))
    for L, c in u.log_terms:
        if c <= 0:
            return None
        m = float(sum(abs(x) for x in L.b) + abs(L.c))
        if m == 0.0:
            return None
        bv = np.array([float(x) for x in L.b])
        G0 += float(c) * np.outer(bv, bv) / m
    lam0 = float(np.linalg.eigvalsh(G0)[0])
    if lam0 <= 0:
        return None
    db = np.array([float(x) for x in delta_b])
    C = float(db @ db) / lam0
    return (fr(C * (1 + 1e-6)), 1)


def crease_identity_check(
    P: Polyhedron,
    v: Weight,
    w: Weight,
    u: SymplecticPotential,
    f: PiecewiseLinearConvex,
    rel_tol=1e-7,
    abs_tol=1e-9,
    solution_tol=1e-6,
    samples=None,
    crease_factor_bound=None,
    workers=1,
) -> float:
    """|F(f) - sum over creases of integral v <db, H db> dsigma|.

    First verifies that u actually solves the generalized Abreu equation at
    interior sample points (NotASolution otherwise), then compares the
    Futaki invariant of f against the crease-sum form that integration by
    parts produces for a genuine solution.
    """
    if samples is None:
        samples = [
            x
            for x in _sample_points(P, 6, 40)
            if P.contains([fr(float(c)) for c in x], strict=True)
        ]
    if not samples:
        raise NotASolution("no interior sample points to verify the solution")
    worst = 0.0
    wscale = 1.0
    for x in samples:
        xf = np.array([float(c) for c in x])
        resid = abs(abreu_scal_v(u, v, xf) - w.value(xf))
        worst = max(worst, resid)
        wscale = max(wscale, abs(w.value(xf)))
    if worst > solution_tol * wscale:
        raise NotASolution(
            f"Abreu residual {worst:.3g} exceeds tolerance at a sample point"
        )
    eff_rel = min(rel_tol, 1e-8)
    F = futaki(P, v, w, f, rel_tol=eff_rel, abs_tol=abs_tol, workers=workers)
    fp = _pruned(f, P)
    _, creases = regions_and_creases(fp, P)
    total = 0.0
    for cr in creases:
        db = np.array([float(x) for x in cr.delta_b])

        def qform(pts, _db=db):
            out = np.empty(pts.shape[0])
            for k in range(pts.shape[0]):
                G = u.hess(pts[k])
                out[k] = float(_db @ np.linalg.solve(G, _db))
            return out

        bound = crease_factor_bound
        if bound is None:
            bound = _crease_form_bound(u, cr.delta_b)
        if bound is None and not (
            cr.slice.domain is None or cr.slice.domain.is_bounded()
        ):
            raise ValueError(
                "crease slice is unbounded and no factor bound is available"
            )
        res = integrate_slice(
            cr.slice,
            v,
            rel_tol=rel_tol,
            abs_tol=abs_tol,
            factor=qform,
            factor_bound=None
            if bound is None
            else _slice_adjusted_bound(bound, cr.slice),
            workers=workers,
        )
        total += res.value
    return abs(F.value - total)
