"""Polyhedra, cones, Delzant predicates, truncation, facet charts."""
import random
from fractions import Fraction

import pytest

from wkstab.errors import (
    EmptyInterior,
    NonPrimitiveNormal,
    NotInteriorDirection,
    NotSimple,
)
from wkstab.geometry import (
    Cone,
    HalfSpace,
    Polyhedron,
    box,
    half_line,
    orthant_shifted,
)
from wkstab.rational import det, dot, vec

F = Fraction


def test_halfspace_normalization():
    h = HalfSpace.from_rational([2, 4], 6)
    assert h.normal == (1, 2) and h.offset == 3
    h2 = HalfSpace.from_rational([F(1, 2), 0], F(1, 4))
    assert h2.normal == (1, 0) and h2.offset == F(1, 2)
    assert h2.value([1, 7]) == F(3, 2)
    with pytest.raises(NonPrimitiveNormal):
        HalfSpace((2, 4), 1)
    with pytest.raises(NonPrimitiveNormal):
        HalfSpace((0, 0), 1)


def test_halfspace_json_round_trip():
    h = HalfSpace((1, -3), F(5, 2))
    assert HalfSpace.from_json(h.to_json()) == h


def test_interior_point_and_contains():
    P = orthant_shifted(2)
    p = P.interior_point()
    assert P.contains(p, strict=True)
    assert P.contains([-1, 0]) and not P.contains([-1, 0], strict=True)
    assert not P.contains([-2, 0])


def test_empty_interior_raises():
    P = Polyhedron(1, [HalfSpace((1,), 0), HalfSpace((-1,), 0)])
    with pytest.raises(EmptyInterior):
        P.interior_point()


def test_validate_reports_redundancy():
    P = Polyhedron(
        1, [HalfSpace((1,), 1), HalfSpace((1,), 5)]
    )  # x >= -1 makes x >= -5 redundant
    rep = P.validate()
    assert rep["redundant"] == [1]
    assert not rep["bounded"]
    assert len(P.reduced().halfspaces) == 1


def test_vertices_of_box():
    B = box([(0, 1), (0, 2)])
    assert B.vertices() == [(0, 0), (0, 2), (1, 0), (1, 2)]
    assert B.is_bounded()
    assert B.is_delzant()


def test_delzant_predicates():
    for n in (1, 2, 3):
        assert orthant_shifted(n).is_delzant()
    assert box([(0, 1)] * 3).is_delzant()
    # det-2 wedge: normals (1,0) and (1,2) at the origin vertex
    wedge = Polyhedron(2, [HalfSpace((1, 0), 0), HalfSpace((1, 2), 0)])
    assert not wedge.is_delzant()


def test_non_simple_vertex_raises():
    # three facets through one vertex in the plane
    P = Polyhedron(
        2,
        [
            HalfSpace((1, 0), 0),
            HalfSpace((0, 1), 0),
            HalfSpace((1, 1), 0),
        ],
    )
    with pytest.raises(NotSimple):
        P.vertex_edge_directions((F(0), F(0)))


def test_anticanonical_flag():
    assert orthant_shifted(2).is_anticanonical()
    assert not orthant_shifted(2, offset=2).is_anticanonical()


def test_recession_cone_and_boundedness():
    P = orthant_shifted(2)
    C = P.recession_cone()
    assert not C.is_trivial()
    assert C.contains([1, 1]) and not C.contains([-1, 0])
    assert not P.is_bounded()
    assert box([(0, 1), (0, 1)]).recession_cone().is_trivial()


def test_dual_cone_orthant():
    C = Cone(2, [(1, 0), (0, 1)])
    D = C.dual()
    assert D.contains([1, 0]) and D.contains([1, 1])
    assert not D.contains([-1, 0])
    assert D.dual() == C


def _random_cone(rng, n):
    k = rng.randint(1, n + 1)
    normals = []
    while len(normals) < k:
        cand = tuple(rng.randint(-3, 3) for _ in range(n))
        if any(c != 0 for c in cand):
            normals.append(cand)
    return Cone(n, normals)


def test_dual_involution_random_cones():
    rng = random.Random(7)
    for _ in range(20):
        n = rng.choice([1, 2, 3])
        C = _random_cone(rng, n)
        assert C.dual().dual() == C


def _random_shear(rng, n):
    # unimodular by construction: product of elementary shears
    M = [[1 if i == j else 0 for j in range(n)] for i in range(n)]

    def matmul(A, B):
        return [
            [sum(A[i][k] * B[k][j] for k in range(n)) for j in range(n)]
            for i in range(n)
        ]

    for _ in range(4):
        i, j = rng.sample(range(n), 2) if n > 1 else (0, 0)
        if i == j:
            continue
        S = [[1 if a == b else 0 for b in range(n)] for a in range(n)]
        S[i][j] = rng.randint(-2, 2)
        M = matmul(M, S)
    return M


def test_truncation_bounds_random_delzant_cones():
    # unimodular images of the shifted orthant stay Delzant and unbounded;
    # the automatic truncation must produce a bounded polyhedron
    rng = random.Random(23)
    for _ in range(20):
        n = rng.choice([1, 2, 3])
        M = _random_shear(rng, n)
        hs = [
            HalfSpace(
                tuple(M[i][j] for j in range(n)), F(rng.randint(1, 3))
            )
            for i in range(n)
        ]
        P = Polyhedron(n, hs)
        assert not P.is_bounded()
        assert P.is_delzant()
        T = P.truncate()
        assert T.is_bounded()
        assert T.contains(P.interior_point())


def test_truncate_rejects_wrong_direction():
    P = orthant_shifted(2)
    with pytest.raises(NotInteriorDirection):
        P.truncate(b_plus=(1, -1))
    # bounded polyhedra pass through unchanged
    B = box([(0, 1)])
    assert B.truncate() is B


def test_auto_truncation_direction_is_dual_interior():
    P = orthant_shifted(2)
    b = P.auto_truncation_direction()
    for ray in P.recession_cone().rays:
        assert dot(b, ray) > 0


def test_facet_atlas_measure_scale_is_one_for_primitive_normals():
    # lattice-normalized measure: dS/|normal| pulls back to Lebesgue measure
    skew = Polyhedron(
        2,
        [
            HalfSpace((1, 0), 1),
            HalfSpace((0, 1), 1),
            HalfSpace((-1, -2), 10),
        ],
    )
    atlas = skew.facet_atlas()
    assert len(atlas) == 3
    for slc in atlas:
        assert slc.measure_scale == 1
        # chart point satisfies the facet equation exactly
        assert dot(slc.normal, slc.point) == slc.rhs


def test_facet_atlas_1d_is_point_evaluation():
    atlas = half_line(-1).facet_atlas()
    assert len(atlas) == 1
    assert atlas[0].domain is None
    assert atlas[0].point == (F(-1),)
    assert atlas[0].measure_scale == 1


def test_interior_polyhedron_shrinks():
    P = orthant_shifted(2)
    Q = P.interior_polyhedron(F(1, 2))
    assert Q.contains([0, 0], strict=True)
    assert not Q.contains([-1 + F(1, 4), 0])


def test_json_round_trip_and_equality():
    P = orthant_shifted(3, offset=F(3, 2))
    Q = Polyhedron.from_json(P.to_json())
    assert P == Q and hash(P) == hash(Q)


def test_product_cylindrical_check_bounded():
    split = box([(0, 1), (0, 1)]).product_cylindrical_check()
    assert split.is_product


def test_edge_directions_of_orthant_vertex():
    P = orthant_shifted(2)
    dirs = P.vertex_edge_directions((F(-1), F(-1)))
    assert sorted(dirs) == [(0, 1), (1, 0)]
    assert abs(det(dirs)) == 1
