"""Convex piecewise-linear test functions and their polyhedral combinatorics.

A function is stored as the max of affine pieces.  Region decompositions,
crease slices with their lattice measures, admissibility cones, and the
test-configuration polytope are all computed in exact rational arithmetic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import NotAdmissible, RTooSmall, SchemaError
from .geometry import AffineSlice, HalfSpace, Polyhedron
from .lp import OPTIMAL, UNBOUNDED, lp_max, strict_interior_point, sup_linear
from .rational import dot, fr, fr_str, vec, vsub
from .weights import AffineForm

log = logging.getLogger(__name__)


class PiecewiseLinearConvex:
    """max of affine pieces <b_a, x> + c_a.

    When built with a polyhedron, pieces that never strictly dominate on a
    full-dimensional region are dropped (irredundancy); dropped pieces are
    logged at INFO.
    """

    __slots__ = ("nvars", "pieces", "polyhedron")

    def __init__(self, pieces, polyhedron=None, prune=True):
        parsed = []
        for p in pieces:
            if not isinstance(p, AffineForm):
                b, c = p
                p = AffineForm(b, c)
            parsed.append(p)
        if not parsed:
            raise ValueError("need at least one affine piece")
        self.nvars = len(parsed[0].b)
        if any(len(p.b) != self.nvars for p in parsed):
            raise ValueError("piece arity mismatch")
        seen = {}
        for p in parsed:
            seen.setdefault((p.b, p.c), p)
        parsed = list(seen.values())
        self.polyhedron = polyhedron
        if prune and polyhedron is not None and len(parsed) > 1:
            parsed = self._prune(parsed, polyhedron)
        self.pieces = tuple(parsed)

    @staticmethod
    def _prune(pieces, poly):
        rows = [hs.normal for hs in poly.halfspaces]
        offs = [hs.offset for hs in poly.halfspaces]
        kept = []
        for i, pi in enumerate(pieces):
            extra_rows = list(rows)
            extra_offs = list(offs)
            for j, pj in enumerate(pieces):
                if i == j:
                    continue
                extra_rows.append(vsub(pi.b, pj.b))
                extra_offs.append(pi.c - pj.c)
            if strict_interior_point(extra_rows, extra_offs) is not None:
                kept.append(pi)
            else:
                log.info("dropping redundant affine piece %s", pi)
        return kept if kept else [max(pieces, key=lambda p: p.c)]

    # -- evaluation ---------------------------------------------------------

    def value_exact(self, x):
        x = [fr(xi) for xi in x]
        return max(p.value(x) for p in self.pieces)

    def value(self, x) -> float:
        return float(self.value_exact(x))

    def value_array(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        vals = np.empty((len(self.pieces), pts.shape[0]))
        for k, p in enumerate(self.pieces):
            b = np.array([float(v) for v in p.b])
            vals[k] = pts @ b + float(p.c)
        return np.max(vals, axis=0)

    def active_pieces(self, x):
        x = [fr(xi) for xi in x]
        vals = [p.value(x) for p in self.pieces]
        top = max(vals)
        return [i for i, v in enumerate(vals) if v == top]

    def scale(self, k) -> "PiecewiseLinearConvex":
        k = fr(k)
        if k <= 0:
            raise ValueError("scale factor must be positive")
        return PiecewiseLinearConvex(
            [AffineForm([k * bi for bi in p.b], k * p.c) for p in self.pieces],
            polyhedron=self.polyhedron,
            prune=False,
        )

    def __eq__(self, other):
        if not isinstance(other, PiecewiseLinearConvex):
            return NotImplemented
        return set((p.b, p.c) for p in self.pieces) == set(
            (p.b, p.c) for p in other.pieces
        )

    def __hash__(self):
        return hash(frozenset((p.b, p.c) for p in self.pieces))

    def __repr__(self):
        return f"PiecewiseLinearConvex({len(self.pieces)} pieces, n={self.nvars})"

    def to_json(self):
        return {"pieces": [p.to_json() for p in self.pieces]}

    @classmethod
    def from_json(cls, data, polyhedron=None):
        try:
            pieces = [AffineForm.from_json(p) for p in data["pieces"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed PL JSON: {exc}") from exc
        return cls(pieces, polyhedron=polyhedron)


# -- named families ------------------------------------------------------------


def simple_crease(b, a) -> PiecewiseLinearConvex:
    """max{<b,x> + a, 0}."""
    b = vec(b)
    zero = AffineForm([0] * len(b), 0)
    return PiecewiseLinearConvex([AffineForm(b, a), zero], prune=False)


def f_R(direction, R) -> PiecewiseLinearConvex:
    """max{<direction,x> - R, 0}: the outward-crease destabilizer family."""
    return simple_crease(direction, -fr(R))


def f_x0(x0) -> PiecewiseLinearConvex:
    """max{x0 - x, 0} on the line."""
    return PiecewiseLinearConvex(
        [AffineForm([-1], x0), AffineForm([0], 0)], prune=False
    )


FAMILIES = {"simple_crease": simple_crease, "f_R": f_R, "f_x0": f_x0}


# -- region / crease decomposition ---------------------------------------------


@dataclass
class Crease:
    """Codimension-one locus {l_a = l_b} with its measure-true slice.

    ``delta_b`` = b_a - b_b; the slice measure is (surface)/|delta_b|, so the
    crease integral in the stability identity needs no further normalization.
    """

    a: int
    b: int
    delta_b: tuple
    difference: AffineForm
    slice: AffineSlice


def regions_and_creases(f: PiecewiseLinearConvex, P: Polyhedron):
    """Full-dimensional maximizer regions and the creases between them.

    Returns (regions, creases) where regions[i] = (piece_index, Polyhedron).
    """
    f = PiecewiseLinearConvex(f.pieces, polyhedron=P, prune=True)
    n = P.dim
    regions = []
    region_index = {}
    for a, pa in enumerate(f.pieces):
        hs = list(P.halfspaces)
        for b, pb in enumerate(f.pieces):
            if a == b:
                continue
            hs.append(HalfSpace.from_rational(vsub(pa.b, pb.b), pa.c - pb.c))
        region = Polyhedron(n, hs, reduce=True)
        regions.append((a, region))
        region_index[a] = region
    creases = []
    for a in range(len(f.pieces)):
        for b in range(a + 1, len(f.pieces)):
            pa, pb = f.pieces[a], f.pieces[b]
            delta = vsub(pa.b, pb.b)
            if all(d == 0 for d in delta):
                continue
            extra = []
            for c, pc in enumerate(f.pieces):
                if c in (a, b):
                    continue
                extra.append((vsub(pa.b, pc.b), pa.c - pc.c))
            slc = AffineSlice.from_hyperplane(
                P, delta, pb.c - pa.c, extra=extra
            )
            if slc is None:
                continue
            creases.append(
                Crease(
                    a=a,
                    b=b,
                    delta_b=delta,
                    difference=AffineForm(delta, pa.c - pb.c),
                    slice=slc,
                )
            )
    return regions, creases


# -- admissibility --------------------------------------------------------------


def is_admissible(f: PiecewiseLinearConvex, P: Polyhedron) -> bool:
    """True iff every slope pairs nonpositively with the recession cone."""
    cone = P.recession_cone()
    for p in f.pieces:
        for g in cone.rays:
            if dot(p.b, g) > 0:
                return False
        for g in cone.lines:
            if dot(p.b, g) != 0:
                return False
    return True


def sup_pl(f: PiecewiseLinearConvex, P: Polyhedron):
    """Exact sup of f over P, or None when unbounded above."""
    rows = [hs.normal for hs in P.halfspaces]
    offs = [hs.offset for hs in P.halfspaces]
    best = None
    for p in f.pieces:
        status, value, _ = sup_linear(p.b, rows, offs)
        if status == UNBOUNDED:
            return None
        if status == OPTIMAL:
            total = value + p.c
            best = total if best is None else max(best, total)
    return best


def is_D_admissible(f: PiecewiseLinearConvex, P: Polyhedron, D):
    """(flag, piece index) for the bounded-slope active-piece condition.

    The chosen piece must be active at the origin, have Euclidean norm of its
    slope at most D, cut a bounded sublevel set {<-b_j, x> <= 1} out of P, and
    satisfy sup(f - a_j) <= D over the complementary region, all exactly.
    """
    D = fr(D)
    if not P.contains([0] * P.dim, strict=True):
        raise ValueError("origin must be interior to the polyhedron")
    if not is_admissible(f, P):
        return False, None
    cone = P.recession_cone()
    rows = [hs.normal for hs in P.halfspaces]
    offs = [hs.offset for hs in P.halfspaces]
    for j in f.active_pieces([0] * P.dim):
        bj = f.pieces[j].b
        aj = f.pieces[j].c
        if dot(bj, bj) > D * D:
            continue
        if cone.lines:
            continue
        if any(dot(bj, g) >= 0 for g in cone.rays):
            continue
        region_rows = rows + [[-x for x in bj]]
        region_offs = offs + [Fraction(-1)]
        ok = True
        for p in f.pieces:
            status, value, _ = sup_linear(p.b, region_rows, region_offs)
            if status == UNBOUNDED:
                ok = False
                break
            if status == OPTIMAL and value + p.c - aj > D:
                ok = False
                break
        if ok:
            return True, j
    return False, None


# -- normalizations --------------------------------------------------------------


def normalize_plus(f: PiecewiseLinearConvex, P, j) -> PiecewiseLinearConvex:
    """f - l_j: vanishes on piece j's region, nonnegative everywhere."""
    lj = f.pieces[j]
    return PiecewiseLinearConvex(
        [AffineForm(vsub(p.b, lj.b), p.c - lj.c) for p in f.pieces],
        polyhedron=P,
        prune=False,
    )


def _zero_in_hull(slopes):
    """Exact test that 0 lies in the convex hull of the given slopes."""
    n = len(slopes[0])
    k = len(slopes)
    # variables lambda_1..lambda_k >= 0, sum = 1, sum lambda_i slopes_i = 0
    a_ub = []
    b_ub = []
    for i in range(k):
        row = [Fraction(0)] * k
        row[i] = Fraction(-1)
        a_ub.append(row)
        b_ub.append(Fraction(0))
    ones = [Fraction(1)] * k
    a_ub.append(ones)
    b_ub.append(Fraction(1))
    a_ub.append([Fraction(-1)] * k)
    b_ub.append(Fraction(-1))
    for d in range(n):
        row = [slopes[i][d] for i in range(k)]
        a_ub.append(row)
        b_ub.append(Fraction(0))
        a_ub.append([-x for x in row])
        b_ub.append(Fraction(0))
    status, _, _ = lp_max([Fraction(0)] * k, a_ub, b_ub)
    return status == OPTIMAL


def subgradient_at_zero(f: PiecewiseLinearConvex):
    """Deterministic subgradient of f at the origin.

    Picks 0 whenever 0 lies in the subdifferential (so already-normalized
    functions stay fixed); otherwise the lexicographically smallest active
    slope.
    """
    active = f.active_pieces([0] * f.nvars)
    slopes = [f.pieces[i].b for i in active]
    if _zero_in_hull(slopes):
        return tuple([Fraction(0)] * f.nvars)
    return min(slopes)


def normalize_star(f, P, grad0=None):
    """f - f(0) - <g0, x> with g0 a subgradient at 0: convex, >= 0, 0 at 0.

    PL inputs get the exact subgradient rule and a PL result; generic convex
    callables are shifted with a finite-difference gradient and returned as a
    callable.
    """
    if isinstance(f, PiecewiseLinearConvex):
        g0 = vec(grad0) if grad0 is not None else subgradient_at_zero(f)
        f0 = f.value_exact([0] * f.nvars)
        return PiecewiseLinearConvex(
            [AffineForm(vsub(p.b, g0), p.c - f0) for p in f.pieces],
            polyhedron=P,
            prune=False,
        )
    n = P.dim
    origin = [0.0] * n
    f0 = float(f(origin))
    if grad0 is None:
        h = 1e-6
        g0 = []
        for i in range(n):
            xp = list(origin)
            xm = list(origin)
            xp[i] += h
            xm[i] -= h
            g0.append((float(f(xp)) - float(f(xm))) / (2 * h))
    else:
        g0 = [float(g) for g in grad0]

    def shifted(x):
        return float(f(x)) - f0 - sum(gi * float(xi) for gi, xi in zip(g0, x))

    return shifted


# -- test configuration polytope ---------------------------------------------------


def test_config_polytope(f: PiecewiseLinearConvex, P: Polyhedron, R) -> Polyhedron:
    """Q = {(x, y) : x in P, 0 <= y <= R - f(x)} as an (n+1)-dim polyhedron."""
    R = fr(R)
    if not is_admissible(f, P):
        raise NotAdmissible("a slope leaves -dual(recession cone)")
    sup = sup_pl(f, P)
    if sup is None:
        raise NotAdmissible("function is unbounded above on the polyhedron")
    if R < sup:
        raise RTooSmall(
            "R must dominate the sup of f",
            r=float(R),
            sup=float(sup),
        )
    n = P.dim
    hs = []
    for h in P.halfspaces:
        hs.append(HalfSpace(tuple(list(h.normal) + [0]), h.offset))
    hs.append(HalfSpace(tuple([0] * n + [1]), 0))
    for p in f.pieces:
        hs.append(
            HalfSpace.from_rational(
                [-x for x in p.b] + [Fraction(-1)], R - p.c
            )
        )
    return Polyhedron(n + 1, hs, reduce=True)
