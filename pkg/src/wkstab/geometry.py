"""Rational polyhedral geometry: unbounded polyhedra, cones, facets.

A polyhedron is stored as an intersection of half-spaces {<normal, x> +
offset >= 0} with primitive integer normals and rational offsets.  All
predicates (vertices, simplicity, lattice conditions, redundancy, membership)
are decided exactly over Fractions; floats never enter this module.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import lp
from .errors import (
    EmptyInterior,
    NonPrimitiveNormal,
    NotInteriorDirection,
    NotSimple,
)
from .rational import (
    det,
    dot,
    fr,
    fr_str,
    hyperplane_measure_scale,
    is_primitive_integer,
    kernel_basis,
    lattice_kernel_basis,
    norm2,
    primitivize,
    solve,
    vadd,
    vec,
    vscale,
    vsub,
)

log = logging.getLogger(__name__)

AUTO = "auto"


@dataclass(frozen=True)
class HalfSpace:
    """{x : <normal, x> + offset >= 0} with a primitive integer inner normal."""

    normal: tuple
    offset: Fraction

    def __post_init__(self):
        normal = tuple(fr(x) for x in self.normal)
        if all(x == 0 for x in normal):
            raise NonPrimitiveNormal("half-space normal must be nonzero")
        if not is_primitive_integer(normal):
            raise NonPrimitiveNormal(
                f"normal {tuple(map(str, normal))} is not a primitive integer vector",
                normal=normal,
            )
        object.__setattr__(self, "normal", tuple(int(x) for x in normal))
        object.__setattr__(self, "offset", fr(self.offset))

    def value(self, x):
        return dot(self.normal, x) + self.offset

    def to_json(self):
        return {"normal": list(self.normal), "offset": fr_str(self.offset)}

    @classmethod
    def from_json(cls, data):
        return cls(tuple(data["normal"]), fr(data["offset"]))

    @classmethod
    def from_rational(cls, normal, offset):
        """Scale a rational inequality <normal,x> + offset >= 0 to primitive form."""
        normal = vec(normal)
        prim = primitivize(normal)
        j = next(i for i, x in enumerate(prim) if x != 0)
        scale = normal[j] / prim[j]  # positive by construction
        return cls(prim, fr(offset) / scale)


def _dedupe(halfspaces):
    seen = set()
    out = []
    for h in halfspaces:
        key = (h.normal, h.offset)
        if key not in seen:
            seen.add(key)
            out.append(h)
    return out


class Polyhedron:
    """Full-dimensional rational polyhedron, possibly unbounded."""

    def __init__(self, dim, halfspaces, reduce=False):
        self.dim = int(dim)
        hs = []
        for h in halfspaces:
            if not isinstance(h, HalfSpace):
                h = HalfSpace(tuple(h[0]), h[1])
            if len(h.normal) != self.dim:
                raise ValueError("normal dimension mismatch")
            hs.append(h)
        self.halfspaces = tuple(_dedupe(hs))
        self._interior = None
        self._vertices = None
        if reduce:
            self.halfspaces = tuple(self._essential_halfspaces())

    # -- basic queries -------------------------------------------------

    @property
    def origin_interior(self) -> bool:
        return all(h.offset > 0 for h in self.halfspaces)

    def contains(self, x, strict=False) -> bool:
        x = vec(x)
        if strict:
            return all(h.value(x) > 0 for h in self.halfspaces)
        return all(h.value(x) >= 0 for h in self.halfspaces)

    def interior_point(self):
        """A strict interior witness (exact), cached."""
        if self._interior is None:
            witness = lp.strict_interior_point(
                [h.normal for h in self.halfspaces],
                [h.offset for h in self.halfspaces],
            )
            if witness is None:
                raise EmptyInterior(
                    "polyhedron has empty interior", halfspaces=self.halfspaces
                )
            self._interior = witness[0]
        return self._interior

    def validate(self):
        """Checks invariants; returns a report dict.

        Raises EmptyInterior when the interior is empty.  Redundant
        half-spaces are reported, not fatal (use .reduced() to drop them).
        """
        point = self.interior_point()
        redundant = [
            i
            for i in range(len(self.halfspaces))
            if not self._supports_facet(i)
        ]
        return {
            "dim": self.dim,
            "interior_point": point,
            "redundant": redundant,
            "n_halfspaces": len(self.halfspaces),
            "bounded": self.is_bounded(),
        }

    def _supports_facet(self, i) -> bool:
        rows = [h.normal for j, h in enumerate(self.halfspaces) if j != i]
        offs = [h.offset for j, h in enumerate(self.halfspaces) if j != i]
        h = self.halfspaces[i]
        witness = lp.strict_interior_point(
            rows, offs, extra_eq=[(h.normal, -h.offset)]
        )
        return witness is not None

    def _essential_halfspaces(self):
        kept = []
        for i, h in enumerate(self.halfspaces):
            if self._supports_facet(i):
                kept.append(h)
            else:
                log.info("dropping redundant half-space %s", h)
        return kept

    def reduced(self) -> "Polyhedron":
        return Polyhedron(self.dim, self._essential_halfspaces())

    # -- vertices and Delzant condition ---------------------------------

    def vertices(self):
        """All vertices, lexicographically sorted, with exact coordinates."""
        if self._vertices is not None:
            return self._vertices
        n = self.dim
        found = {}
        hs = self.halfspaces
        for subset in itertools.combinations(range(len(hs)), n):
            rows = [hs[i].normal for i in subset]
            rhs = [-hs[i].offset for i in subset]
            point = solve(rows, rhs)
            if point is None:
                continue
            if all(h.value(point) >= 0 for h in hs):
                found[point] = None
        self._vertices = sorted(found.keys())
        return self._vertices

    def active_set(self, x):
        x = vec(x)
        return tuple(i for i, h in enumerate(self.halfspaces) if h.value(x) == 0)

    def vertex_edge_directions(self, vertex):
        """Primitive integer edge directions at a simple vertex."""
        active = self.active_set(vertex)
        n = self.dim
        if len(active) != n:
            raise NotSimple(
                f"vertex {tuple(map(str, vertex))} has {len(active)} active facets "
                f"in dimension {n}",
                vertex=vertex,
                active=active,
            )
        dirs = []
        for drop in active:
            keep = [i for i in active if i != drop]
            basis = kernel_basis([self.halfspaces[i].normal for i in keep], n=n)
            if len(basis) != 1:
                raise NotSimple(
                    "active normals at vertex are linearly dependent",
                    vertex=vertex,
                )
            d = basis[0]
            if dot(self.halfspaces[drop].normal, d) < 0:
                d = vscale(-1, d)
            dirs.append(primitivize(d))
        return dirs

    def is_delzant(self) -> bool:
        """True when every vertex is simple with a unimodular edge basis."""
        for v in self.vertices():
            dirs = self.vertex_edge_directions(v)
            if abs(det(dirs)) != 1:
                return False
        return True

    # -- recession structure ---------------------------------------------

    def recession_cone(self) -> "Cone":
        return Cone(self.dim, [h.normal for h in self.halfspaces])

    def is_bounded(self) -> bool:
        return self.recession_cone().is_trivial()

    def is_anticanonical(self) -> bool:
        return all(h.offset == 1 for h in self.halfspaces)

    # -- derived polyhedra ------------------------------------------------

    def interior_polyhedron(self, delta) -> "Polyhedron":
        """Shrink every half-space inward by Euclidean distance delta.

        |normal| is irrational in general; it is replaced by a rational
        upper bound accurate to float precision, which only matters for
        sampling-based checks, never for combinatorial predicates.
        """
        delta = fr(delta)
        hs = []
        for h in self.halfspaces:
            length = fr(math.nextafter(math.sqrt(float(norm2(h.normal))), math.inf))
            hs.append(HalfSpace(h.normal, h.offset - delta * length))
        return Polyhedron(self.dim, hs)

    def truncate(self, b_plus=AUTO, delta_star=fr(1)):
        """Intersect with {<b_plus, x> <= delta_star}.

        b_plus must lie in the interior of the dual of the recession cone
        (AUTO picks the sum of the dual cone's primitive generators).
        Bounded polyhedra are returned unchanged.
        """
        cone = self.recession_cone()
        if cone.is_trivial():
            return self
        if b_plus == AUTO:
            b_plus = self.auto_truncation_direction()
        b_plus = vec(b_plus)
        for ray in cone.rays:
            if dot(b_plus, ray) <= 0:
                raise NotInteriorDirection(
                    "truncation direction is not interior to the dual cone",
                    direction=b_plus,
                    ray=ray,
                )
        if cone.lines:
            raise NotInteriorDirection(
                "recession cone has lineality; no single truncation bounds it",
                lines=cone.lines,
            )
        cut = HalfSpace.from_rational(vscale(-1, b_plus), fr(delta_star))
        return Polyhedron(self.dim, list(self.halfspaces) + [cut])

    def auto_truncation_direction(self):
        cone = self.recession_cone()
        dual = cone.dual()
        if not dual.rays:
            raise NotInteriorDirection(
                "dual cone has no rays; cannot pick a truncation direction"
            )
        total = dual.rays[0]
        for ray in dual.rays[1:]:
            total = vadd(total, ray)
        return total

    # -- facet atlas -------------------------------------------------------

    def facet_atlas(self):
        """Lattice-adapted charts for all facets (see AffineSlice)."""
        atlas = []
        for i, h in enumerate(self.halfspaces):
            piece = AffineSlice.from_hyperplane(
                self, h.normal, -h.offset, skip_index=i, parent_index=i
            )
            if piece is not None:
                atlas.append(piece)
        return atlas

    # -- asymptotic product structure ---------------------------------------

    def product_cylindrical_check(self) -> "ProductSplit":
        return _product_cylindrical_check(self)

    # -- serialization -------------------------------------------------------

    def to_json(self):
        return {
            "dim": self.dim,
            "halfspaces": [h.to_json() for h in self.halfspaces],
        }

    @classmethod
    def from_json(cls, data):
        return cls(
            data["dim"], [HalfSpace.from_json(h) for h in data["halfspaces"]]
        )

    def __eq__(self, other):
        if not isinstance(other, Polyhedron):
            return NotImplemented
        return self.dim == other.dim and set(self.halfspaces) == set(other.halfspaces)

    def __hash__(self):
        return hash((self.dim, frozenset(self.halfspaces)))

    def __repr__(self):
        parts = ", ".join(
            f"<{h.normal},x>+{fr_str(h.offset)}>=0" for h in self.halfspaces
        )
        return f"Polyhedron(dim={self.dim}: {parts})"


def orthant_shifted(n, offset=1) -> Polyhedron:
    """The translated orthant {x_i >= -offset}; offset 1 is anticanonical."""
    hs = [
        HalfSpace(tuple(1 if j == i else 0 for j in range(n)), fr(offset))
        for i in range(n)
    ]
    return Polyhedron(n, hs)


def half_line(a=-1) -> Polyhedron:
    """The interval [a, +infinity) as a 1D polyhedron."""
    return Polyhedron(1, [HalfSpace((1,), -fr(a))])


def box(bounds) -> Polyhedron:
    """Product of intervals; bounds is a list of (lo, hi)."""
    n = len(bounds)
    hs = []
    for i, (lo, hi) in enumerate(bounds):
        e = tuple(1 if j == i else 0 for j in range(n))
        me = tuple(-1 if j == i else 0 for j in range(n))
        hs.append(HalfSpace(e, -fr(lo)))
        hs.append(HalfSpace(me, fr(hi)))
    return Polyhedron(n, hs)


class Cone:
    """Polyhedral cone {x : <normal_i, x> >= 0} with generator computation."""

    def __init__(self, dim, normals=(), generators=None):
        self.dim = int(dim)
        norm_list = []
        for nu in normals:
            nu = vec(nu)
            if all(x == 0 for x in nu):
                continue
            norm_list.append(primitivize(nu))
        seen = {}
        for nu in norm_list:
            seen[nu] = None
        self.normals = tuple(seen.keys())
        self._gens = generators  # optional pre-computed (rays, lines)

    # -- generator enumeration (double description) -------------------------

    def _generators(self):
        if self._gens is None:
            self._gens = _double_description(self.dim, self.normals)
        return self._gens

    @property
    def rays(self):
        return self._generators()[0]

    @property
    def lines(self):
        return self._generators()[1]

    def is_trivial(self) -> bool:
        return not self.rays and not self.lines

    def is_pointed(self) -> bool:
        return not self.lines

    def contains(self, x, strict=False) -> bool:
        x = vec(x)
        if strict:
            return all(dot(nu, x) > 0 for nu in self.normals)
        return all(dot(nu, x) >= 0 for nu in self.normals)

    def interior_contains(self, x) -> bool:
        """Membership in the relative-interior-free sense: strict on all normals."""
        return self.contains(x, strict=True)

    def dual(self) -> "Cone":
        """{xi : <xi, c> >= 0 for all c in C}; generators become normals."""
        constraints = list(self.rays)
        for line in self.lines:
            constraints.append(line)
            constraints.append(vscale(-1, line))
        return Cone(self.dim, constraints)

    def canonical_generators(self):
        rays = sorted(primitivize(r) for r in self.rays)
        lines = []
        for line in self.lines:
            p = primitivize(line)
            j = next(i for i, x in enumerate(p) if x != 0)
            if p[j] < 0:
                p = tuple(-x for x in p)
            lines.append(p)
        return tuple(rays), tuple(sorted(set(lines)))

    def __eq__(self, other):
        if not isinstance(other, Cone):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.canonical_generators() == other.canonical_generators()
        )

    def __hash__(self):
        return hash((self.dim, self.canonical_generators()))

    def __repr__(self):
        rays, lines = self.canonical_generators()
        return f"Cone(dim={self.dim}, rays={rays}, lines={lines})"


def _double_description(dim, normals):
    """Rays and lines of {x : <nu, x> >= 0 for nu in normals}."""
    lines = [tuple(Fraction(int(i == j)) for j in range(dim)) for i in range(dim)]
    rays = []  # list of (vector, frozenset of tight constraint indices)
    processed = []
    for idx, nu in enumerate(normals):
        if lines:
            pivots = [l for l in lines if dot(nu, l) != 0]
            if pivots:
                pivot = pivots[0]
                pv = dot(nu, pivot)
                if pv < 0:
                    pivot = vscale(-1, pivot)
                    pv = -pv
                new_lines = []
                for l in lines:
                    if l is pivots[0]:
                        continue
                    lv = dot(nu, l)
                    if lv == 0:
                        new_lines.append(l)
                    else:
                        new_lines.append(vsub(l, vscale(lv / pv, pivot)))
                new_rays = []
                for r, tight in rays:
                    rv = dot(nu, r)
                    if rv == 0:
                        new_rays.append((r, tight))
                    else:
                        new_rays.append((vsub(r, vscale(rv / pv, pivot)), tight))
                lines = new_lines
                rays = new_rays + [(pivot, frozenset())]
                # pivot ray is tight on nothing among earlier constraints by
                # construction; recompute tight sets exactly below
                rays = [
                    (r, frozenset(k for k in processed if dot(normals[k], r) == 0))
                    for r, _ in rays
                ]
                processed.append(idx)
                continue
        plus = [(r, t) for r, t in rays if dot(nu, r) > 0]
        zero = [(r, t) for r, t in rays if dot(nu, r) == 0]
        minus = [(r, t) for r, t in rays if dot(nu, r) < 0]
        new_rays = plus + [(r, t | {idx}) for r, t in zero]
        for (rp, tp), (rm, tm) in itertools.product(plus, minus):
            common = tp & tm
            adjacent = True
            for r, t in rays:
                if r is rp or r is rm:
                    continue
                if common <= t:
                    adjacent = False
                    break
            if not adjacent:
                continue
            combo = vadd(
                vscale(dot(nu, rp), rm), vscale(-dot(nu, rm), rp)
            )
            if all(x == 0 for x in combo):
                continue
            new_rays.append((combo, (tp & tm) | {idx}))
        seen = {}
        rays = []
        for r, t in new_rays:
            p = primitivize(r)
            if p not in seen:
                seen[p] = True
                rays.append((vec(p), t))
        processed.append(idx)
    ray_vecs = sorted(primitivize(r) for r, _ in rays)
    line_vecs = []
    for l in lines:
        p = primitivize(l)
        j = next(i for i, x in enumerate(p) if x != 0)
        if p[j] < 0:
            p = tuple(-x for x in p)
        line_vecs.append(p)
    return [vec(r) for r in ray_vecs], [vec(l) for l in sorted(set(line_vecs))]


@dataclass
class AffineSlice:
    """A codimension-one piece of a polyhedron with a measure-true chart.

    The chart is t -> point + sum_k t_k basis_k.  ``domain`` is the parameter
    polyhedron in t (None in ambient dimension 1, where the slice is the
    single point and integration is a point evaluation).  ``measure_scale``
    converts Lebesgue measure dt into the weighted surface measure
    (Euclidean surface measure) / |normal|, and is an exact rational.
    """

    normal: tuple
    rhs: Fraction
    point: tuple
    basis: tuple
    measure_scale: Fraction
    domain: Polyhedron | None
    parent_index: int | None = None

    @classmethod
    def from_hyperplane(
        cls, poly, normal, rhs, skip_index=None, extra=(), parent_index=None
    ):
        """Slice {x in poly : <normal, x> = rhs} with optional extra cuts.

        ``normal`` may be any nonzero rational vector; the measure is
        (surface measure)/|normal| for exactly this normal.  Returns None
        when the slice is empty or not of full codimension-one dimension.
        """
        normal = vec(normal)
        rhs = fr(rhs)
        rows = [
            h.normal
            for j, h in enumerate(poly.halfspaces)
            if j != skip_index
        ]
        offs = [
            h.offset for j, h in enumerate(poly.halfspaces) if j != skip_index
        ]
        for enormal, eoff in extra:
            rows.append(vec(enormal))
            offs.append(fr(eoff))
        witness = lp.strict_interior_point(
            rows, offs, extra_eq=[(normal, rhs)]
        )
        if witness is None:
            return None
        point = witness[0]
        prim = primitivize(normal)
        if poly.dim == 1:
            return cls(
                normal=normal,
                rhs=rhs,
                point=point,
                basis=(),
                measure_scale=hyperplane_measure_scale((), normal),
                domain=None,
                parent_index=parent_index,
            )
        basis = tuple(vec(b) for b in lattice_kernel_basis(prim))
        scale = hyperplane_measure_scale(basis, normal)
        hs = []
        feasible = True
        for row, off in zip(rows, offs):
            coeffs = tuple(dot(row, b) for b in basis)
            const = dot(row, point) + off
            if all(c == 0 for c in coeffs):
                if const < 0:
                    feasible = False
                    break
                continue
            hs.append(HalfSpace.from_rational(coeffs, const))
        if not feasible:
            return None
        domain = Polyhedron(poly.dim - 1, hs, reduce=True)
        return cls(
            normal=normal,
            rhs=rhs,
            point=point,
            basis=basis,
            measure_scale=scale,
            domain=domain,
            parent_index=parent_index,
        )

    def embed(self, t):
        """Map parameter coordinates to ambient coordinates (exact)."""
        x = self.point
        for tk, bk in zip(t, self.basis):
            x = vadd(x, vscale(tk, bk))
        return x


@dataclass
class ProductSplit:
    """Result of the asymptotic product/cylinder decomposition test."""

    is_product: bool
    factor_basis: tuple = ()
    factor_polytope: Polyhedron | None = None
    cone: Cone | None = None
    translation: tuple | None = None
    index_sets: dict = field(default_factory=dict)
    reason: str = ""


def _product_cylindrical_check(poly: Polyhedron) -> ProductSplit:
    cone = poly.recession_cone()
    n = poly.dim
    gens = list(cone.rays) + list(cone.lines) + [vscale(-1, l) for l in cone.lines]
    if not gens:
        return ProductSplit(
            is_product=True,
            factor_basis=tuple(
                tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n)
            ),
            factor_polytope=poly,
            cone=cone,
            translation=tuple(Fraction(0) for _ in range(n)),
            index_sets={"I1": list(range(len(poly.halfspaces))), "I2": [], "I3": []},
            reason="bounded polyhedron",
        )

    i1, i2, i3 = [], [], []
    for i, h in enumerate(poly.halfspaces):
        pairings = [dot(h.normal, g) for g in gens]
        if all(p == 0 for p in pairings):
            i1.append(i)
        elif all(p > 0 for p in pairings):
            i2.append(i)
        else:
            i3.append(i)
    index_sets = {"I1": i1, "I2": i2, "I3": i3}

    # t_V^* = orthogonal complement of span(C); factor polytope lives there
    v_basis = tuple(kernel_basis(gens, n=n))
    if v_basis:
        hs = []
        for i in i1:
            h = poly.halfspaces[i]
            coeffs = tuple(dot(h.normal, b) for b in v_basis)
            if all(c == 0 for c in coeffs):
                continue
            hs.append(HalfSpace.from_rational(coeffs, h.offset))
        if not hs:
            return ProductSplit(
                False, index_sets=index_sets, reason="factor polytope unbounded"
            )
        try:
            factor = Polyhedron(len(v_basis), hs, reduce=True)
            factor.interior_point()
        except EmptyInterior:
            return ProductSplit(
                False, index_sets=index_sets, reason="factor polytope empty"
            )
        if not factor.is_bounded():
            return ProductSplit(
                False, index_sets=index_sets, reason="factor polytope unbounded"
            )
    else:
        factor = None

    # facet normals of C computed inside span(C), lifted back orthogonally
    # to the factor subspace (so each constraint acts on one factor only)
    span_basis = _column_space_basis(gens, n)
    k = len(span_basis)
    span_rows = []
    for nu in cone.normals:
        coeffs = tuple(dot(nu, e) for e in span_basis)
        if any(c != 0 for c in coeffs):
            span_rows.append(coeffs)
    cone_in_span = Polyhedron(
        k, [HalfSpace.from_rational(row, 0) for row in span_rows], reduce=True
    ) if span_rows else None
    gram = [[dot(e1, e2) for e2 in span_basis] for e1 in span_basis]
    mu_list = []
    if cone_in_span is not None:
        for h in cone_in_span.halfspaces:
            coords = solve(gram, h.normal)
            mu = tuple(Fraction(0) for _ in range(n))
            for c, e in zip(coords, span_basis):
                mu = vadd(mu, vscale(c, e))
            mu_list.append(mu)

    # tightest translated cone containing P: offsets from exact minima over P
    b_vals = []
    for mu in mu_list:
        status, value, _ = lp.sup_linear(
            vscale(-1, mu),
            [h.normal for h in poly.halfspaces],
            [h.offset for h in poly.halfspaces],
        )
        if value is None:
            return ProductSplit(
                False, index_sets=index_sets, reason="cone normal unbounded below"
            )
        b_vals.append(-value)

    # translation tau in span(C) with <mu_j, tau> = b_j for all j
    rows = [[dot(mu, sb) for sb in span_basis] for mu in mu_list]
    tau_coords = _solve_least(rows, b_vals)
    if tau_coords is None:
        return ProductSplit(
            False,
            index_sets=index_sets,
            reason="cone offsets are inconsistent with a single translation",
        )
    tau = tuple(Fraction(0) for _ in range(n))
    for c, sb in zip(tau_coords, span_basis):
        tau = vadd(tau, vscale(c, sb))

    # outside a compact set the dropped constraints must be implied:
    # region {I1 constraints, translated cone} minus P must be bounded
    outer_hs = [poly.halfspaces[i] for i in i1] + [
        HalfSpace.from_rational(mu, -b) for mu, b in zip(mu_list, b_vals)
    ]
    for i in i2 + i3:
        h = poly.halfspaces[i]
        if any(
            oh.normal == h.normal and oh.offset == h.offset for oh in outer_hs
        ):
            continue
        # region where constraint i is violated inside the outer region
        viol = outer_hs + [
            HalfSpace.from_rational(vscale(-1, h.normal), -h.offset)
        ]
        try:
            region = Polyhedron(n, viol)
            region.interior_point()
        except EmptyInterior:
            continue
        if not region.is_bounded():
            return ProductSplit(
                False,
                index_sets=index_sets,
                reason=f"constraint {i} fails on an unbounded region",
            )
    return ProductSplit(
        True,
        factor_basis=v_basis,
        factor_polytope=factor,
        cone=Cone(n, mu_list),
        translation=tau,
        index_sets=index_sets,
        reason="",
    )


def _column_space_basis(vectors, n):
    from .rational import rank as _rank

    basis = []
    rows = []
    for v in vectors:
        if _rank(rows + [list(v)]) > len(rows):
            rows.append(list(v))
            basis.append(vec(v))
    return basis


def _solve_least(rows, rhs):
    """Exact solution of a (possibly overdetermined) consistent system.

    Returns None when the system is inconsistent.
    """
    if not rows:
        return ()
    m, k = len(rows), len(rows[0])
    aug = [[fr(x) for x in row] + [fr(rhs[i])] for i, row in enumerate(rows)]
    pivots = []
    r = 0
    for col in range(k):
        pivot = next((i for i in range(r, m) if aug[i][col] != 0), None)
        if pivot is None:
            continue
        aug[r], aug[pivot] = aug[pivot], aug[r]
        p = aug[r][col]
        aug[r] = [x / p for x in aug[r]]
        for i in range(m):
            if i != r and aug[i][col] != 0:
                f = aug[i][col]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[r])]
        pivots.append(col)
        r += 1
    for i in range(r, m):
        if aug[i][k] != 0:
            return None
    x = [Fraction(0)] * k
    for i, col in enumerate(pivots):
        x[col] = aug[i][k]
    return tuple(x)
