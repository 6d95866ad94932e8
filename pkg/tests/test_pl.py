"""Convex piecewise linear functions and their polyhedral decompositions."""
from fractions import Fraction

import pytest

from wkstab import pl
from wkstab.errors import NotAdmissible, RTooSmall
from wkstab.geometry import HalfSpace, Polyhedron, box, half_line, orthant_shifted
from wkstab.pl import (
    PiecewiseLinearConvex,
    f_R,
    f_x0,
    is_admissible,
    is_D_admissible,
    normalize_plus,
    normalize_star,
    regions_and_creases,
    simple_crease,
    subgradient_at_zero,
    sup_pl,
)
from wkstab.weights import AffineForm

F = Fraction


def test_value_and_dedupe():
    f = PiecewiseLinearConvex(
        [AffineForm([1], 0), AffineForm([1], 0), AffineForm([0], 1)],
        prune=False,
    )
    assert len(f.pieces) == 2
    assert f.value([3]) == 3.0
    assert f.value_exact([F(1, 2)]) == 1
    assert f.active_pieces([1]) == [0, 1]


def test_value_array_matches_exact():
    import numpy as np

    f = simple_crease([1, -1], F(1, 2))
    pts = np.array([[0.0, 0.0], [2.0, 0.0], [-3.0, 1.0]])
    vals = f.value_array(pts)
    for row, got in zip(pts, vals):
        assert got == pytest.approx(f.value(row), abs=1e-15)


def test_named_families():
    # f_x0 on the line: max{x0 - x, 0}
    f = f_x0(2)
    assert f.value([0]) == 2.0 and f.value([5]) == 0.0
    # f_R: max{<d,x> - R, 0}
    g = f_R([1, 0], 3)
    assert g.value([5, 7]) == 2.0 and g.value([0, 9]) == 0.0
    h = simple_crease([1, 1], -1)
    assert h.value([1, 1]) == 1.0 and h.value([0, 0]) == 0.0


def test_prune_drops_dominated_piece():
    P = half_line(-1)
    f = PiecewiseLinearConvex(
        [AffineForm([0], 0), AffineForm([-1], -10)],
        polyhedron=P,
        prune=True,
    )
    # -x - 10 < 0 on all of [-1, inf)
    assert len(f.pieces) == 1


def test_scale_and_eq():
    f = simple_crease([1], 0)
    g = f.scale(2)
    assert g.value([3]) == 6.0
    assert f == simple_crease([1], 0)
    with pytest.raises(ValueError):
        f.scale(0)


def test_json_round_trip():
    f = simple_crease([2, -1], F(1, 3))
    assert PiecewiseLinearConvex.from_json(f.to_json()) == f


def test_regions_and_creases_simple_crease():
    P = orthant_shifted(2)
    f = simple_crease([1, 0], 0)  # crease on {x1 = 0}
    regions, creases = regions_and_creases(f, P)
    assert len(regions) == 2
    assert len(creases) == 1
    cr = creases[0]
    assert tuple(abs(d) for d in cr.delta_b) == (1, 0)
    # the crease slice lives on the hyperplane x1 = 0
    assert cr.slice.measure_scale == 1
    # crease chart domain is the x2 range of P
    assert cr.slice.domain.dim == 1


def test_regions_partition_values():
    # on each region the assigned piece dominates at the interior point
    P = orthant_shifted(2)
    f = PiecewiseLinearConvex(
        [AffineForm([0, 0], 0), AffineForm([-1, 0], 0), AffineForm([0, -1], 0)],
        prune=False,
    )
    regions, creases = regions_and_creases(f, P)
    assert len(regions) == 3 and len(creases) == 3
    for a, region in regions:
        x = region.interior_point()
        assert f.pieces[a].value(x) == f.value_exact(x)


def test_admissibility():
    P = half_line(-1)
    assert is_admissible(f_x0(1), P)  # slopes -1 and 0
    assert not is_admissible(simple_crease([1], 0), P)  # slope +1 grows
    assert is_admissible(simple_crease([1], 0), box([(0, 1)]))


def test_sup_pl():
    assert sup_pl(f_x0(2), half_line(-1)) == 3  # attained at x = -1
    assert sup_pl(simple_crease([1], 0), half_line(-1)) is None
    assert sup_pl(simple_crease([1, 1], 0), box([(0, 1), (0, 2)])) == 3


def test_normalize_plus():
    f = f_x0(1)
    g = normalize_plus(f, half_line(-1), 1)  # subtract the zero piece
    assert g == f
    g0 = normalize_plus(f, half_line(-1), 0)
    assert g0.value_exact([-1]) == 0
    assert min(g0.value_exact([x]) for x in (-1, 0, 1, 5)) == 0


def test_subgradient_and_normalize_star():
    # origin on the crease of max{-x, 0}: 0 is a subgradient, f unchanged
    f = simple_crease([-1], 0)
    assert subgradient_at_zero(f) == (F(0),)
    g = normalize_star(f, half_line(-1))
    assert g == f
    # strictly sloped at 0: the slope is removed
    h = PiecewiseLinearConvex([AffineForm([2], 3)], prune=False)
    k = normalize_star(h, half_line(-1))
    assert k.value_exact([0]) == 0
    assert k.value_exact([7]) == 0
    # callable branch: (x-1)^2 - 1 + 2x = x^2
    shifted = normalize_star(lambda x: (x[0] - 1) ** 2, half_line(-1))
    assert shifted([0.0]) == pytest.approx(0.0, abs=1e-9)
    assert shifted([1.0]) == pytest.approx(1.0, abs=1e-5)
    assert shifted([-1.0]) == pytest.approx(1.0, abs=1e-5)


def test_d_admissible():
    P = half_line(-1)
    ok, j = is_D_admissible(f_x0(1), P, 2)
    assert ok
    assert f_x0(1).pieces[j].b == (F(-1),)
    # slope norm above D fails
    steep = PiecewiseLinearConvex(
        [AffineForm([-5], 5), AffineForm([0], 0)], prune=False
    )
    ok2, _ = is_D_admissible(steep, P, 2)
    assert not ok2


def test_config_polytope_shape():
    P = half_line(-1)
    f = f_x0(0)  # sup over P is 1 at x = -1
    Q = pl.test_config_polytope(f, P, 2)
    assert Q.dim == 2
    assert Q.contains([0, 1])  # y = 1 <= 2 - f(0) = 2
    assert not Q.contains([-1, F(3, 2)])  # 2 - f(-1) = 1 < 3/2
    with pytest.raises(RTooSmall):
        pl.test_config_polytope(f, P, F(1, 2))
    with pytest.raises(NotAdmissible):
        pl.test_config_polytope(simple_crease([1], 0), P, 10)
