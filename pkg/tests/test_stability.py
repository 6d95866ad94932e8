"""Weighted Futaki invariants, scaling normalizations, semistability scans."""
import math
from fractions import Fraction

import pytest

from wkstab.errors import EmptyFamily, NotASolution, ZeroDenominator
from wkstab.geometry import HalfSpace, Polyhedron, half_line, orthant_shifted
from wkstab.pl import PiecewiseLinearConvex, f_x0, simple_crease
from wkstab.polynomials import Polynomial
from wkstab.potentials import guillemin_potential
from wkstab.quadrature import integrate_interior
from wkstab.stability import (
    _half_line_weight,
    crease_identity_check,
    find_c_lambda,
    futaki,
    futaki_affine,
    futaki_v_vector,
    normalize_w_scale,
    semistability_scan,
    soliton_futaki_identity_check,
    uniform_lambda_estimate,
)
from wkstab.weights import AffineForm, Weight, WeightTerm, soliton_weight_w

F = Fraction
E = math.e

ONE = PiecewiseLinearConvex([AffineForm([0], 1)], prune=False)


def test_futaki_affine_flat_exact_and_adaptive(flat_1d):
    P, v, w = flat_1d
    for r in futaki_affine(P, v, w):
        assert r.exact is not None
        assert abs(r.value) < 1e-12
    for r in futaki_affine(P, v, w, method="adaptive", abs_tol=1e-8):
        assert abs(r.value) < 1e-6


def test_futaki_crease_closed_form(flat_1d):
    P, v, w = flat_1d
    for x0 in (0, 1, 2, F(7, 2)):
        f = simple_crease([1], -F(x0))
        res = futaki(P, v, w, f)
        assert res.exact is not None
        want = 2 * (float(x0) + 1) * math.exp(-float(x0))
        assert abs(res.value - want) < 1e-10
    # decreasing-crease orientation gives the same value
    for x0 in (0, 1, 2):
        res = futaki(P, v, w, f_x0(x0))
        want = 2 * (x0 + 1) * math.exp(-x0)
        assert abs(res.value - want) < 1e-10


def test_futaki_linearity(flat_1d):
    P, v, w = flat_1d
    zero = PiecewiseLinearConvex([AffineForm([0], 0)], prune=False)
    assert futaki(P, v, w, zero).value == 0.0
    # doubling w shifts F(1) from 0 to -2e
    r = futaki(P, v, w * F(2), ONE)
    assert abs(r.value + 2 * E) < 1e-10


def test_futaki_v_vector():
    P = half_line(-1)
    v = Weight.exponential([1])
    assert abs(futaki_v_vector(P, v)[0].value) < 1e-12
    r2 = futaki_v_vector(orthant_shifted(2), Weight.exponential([1, 1]))
    assert all(abs(x.value) < 1e-12 for x in r2)
    # offset-0 half line: the anticanonical normalization is broken
    r3 = futaki_v_vector(half_line(0), Weight.exponential([1]))[0]
    assert abs(r3.value - 1) < 1e-12


def test_soliton_identity_flat(flat_1d, flat_2d):
    P, v, _ = flat_1d
    rep = soliton_futaki_identity_check(P, v)
    assert rep.holds and rep.anticanonical and rep.consistent
    P2, v2, _ = flat_2d
    rep2 = soliton_futaki_identity_check(P2, v2)
    assert rep2.holds and rep2.consistent


def test_soliton_identity_detects_offset():
    rep = soliton_futaki_identity_check(half_line(0), Weight.exponential([1]))
    assert not rep.holds
    assert not rep.anticanonical and rep.consistent
    assert not rep.probes[0]["holds"]
    assert rep.probes[0]["residual"] == pytest.approx(-2.0, abs=1e-9)


def test_soliton_identity_polynomial_weight():
    P = half_line(-1)
    x = Polynomial.variable(0, 1)
    vpoly = Weight(
        1, [WeightTerm(x**2 + Polynomial.constant(1, 1), (), (F(1),))]
    )
    rep = soliton_futaki_identity_check(P, vpoly)
    assert rep.holds and rep.consistent


def test_soliton_identity_mixed_offsets_fail():
    Pmix = Polyhedron(
        2, [HalfSpace.from_rational([1, 0], 0), HalfSpace.from_rational([0, 1], 1)]
    )
    rep = soliton_futaki_identity_check(Pmix, Weight.exponential([1, 1]))
    assert not rep.holds and not rep.anticanonical and rep.consistent


def test_normalize_w_scale(flat_1d):
    P, v, w = flat_1d
    a = normalize_w_scale(P, v, w * F(1, 2))
    assert a == pytest.approx(2.0, abs=1e-12)
    assert normalize_w_scale(P, v, v) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(ZeroDenominator):
        normalize_w_scale(P, v, Weight(1, []))
    # F_{v, a w}(1) = 0 after scaling
    res = futaki(P, v, (w * F(1, 2)) * F(a), ONE)
    assert abs(res.value) < 1e-10


def test_find_c_lambda_residual():
    c = find_c_lambda(0.5)
    assert c is not None
    res = integrate_interior(
        half_line(-1), _half_line_weight(c, 0.5), rel_tol=1e-10, abs_tol=1e-12
    )
    assert abs(res.value) < 1e-8
    # sign change around the root
    g_lo = integrate_interior(
        half_line(-1), _half_line_weight(c * 0.5, 0.5), rel_tol=1e-8, abs_tol=1e-10
    ).value
    g_hi = integrate_interior(
        half_line(-1), _half_line_weight(c * 2.0, 0.5), rel_tol=1e-8, abs_tol=1e-10
    ).value
    assert g_lo * g_hi < 0


def test_scan_flat_no_destabilizer(flat_1d):
    P, v, w = flat_1d
    verdict = semistability_scan(P, v, w, budget=40)
    assert verdict.kind == "NoDestabilizerFound"
    family_vals = [
        e["value"] for e in verdict.search_log if e["family"] != "affine"
    ]
    assert min(family_vals) > -1e-12
    assert max(family_vals) > 0
    # worker-invariant output
    verdict_b = semistability_scan(P, v, w, budget=40, workers=2)
    assert verdict.to_dict() == verdict_b.to_dict()


def test_scan_affine_obstruction(flat_1d):
    P, v, w = flat_1d
    vd = semistability_scan(P, v, w * F(2), budget=10)
    assert vd.kind == "AffineObstruction"
    assert vd.affine[0] == pytest.approx(-2 * E, abs=1e-8)


def test_uniform_lambda_flat(flat_1d):
    P, v, w = flat_1d
    # family f_x0 normalizes to max{x - x0, 0}; ratio 2(x0+1) minimized at x0=0
    lam = uniform_lambda_estimate(P, v, w, beta=1, gamma=1, K=100.0)
    assert lam == pytest.approx(2.0, abs=1e-8)
    with pytest.raises(EmptyFamily):
        uniform_lambda_estimate(
            P,
            v,
            w,
            beta=1,
            gamma=1,
            K=100.0,
            family=[PiecewiseLinearConvex([AffineForm([1], 0)], prune=False)],
        )


def test_crease_identity_flat_1d(flat_1d):
    P, v, w = flat_1d
    u = guillemin_potential(P)
    assert crease_identity_check(P, v, w, u, simple_crease([1], -1)) < 1e-6
    assert crease_identity_check(P, v, w, u, ONE) < 1e-10


def test_crease_identity_flat_2d(flat_2d):
    P2, v2, w2 = flat_2d
    u2 = guillemin_potential(P2)
    resid = crease_identity_check(P2, v2, w2, u2, simple_crease([-1, 0], 0))
    assert resid < 1e-4


def test_crease_identity_rejects_non_solution(flat_1d):
    P, v, w = flat_1d
    u = guillemin_potential(P)
    with pytest.raises(NotASolution):
        crease_identity_check(P, v, w * F(3), u, ONE)
