"""Weight algebra, calculus, transforms, and the class membership check."""
import math
from fractions import Fraction

import numpy as np
import pytest

from wkstab.errors import FactorNotPositive
from wkstab.geometry import half_line, orthant_shifted
from wkstab.polynomials import Polynomial
from wkstab.rational import ExactExp
from wkstab.weights import (
    AffineForm,
    Weight,
    WeightTerm,
    check_class_W,
    fibration_transform,
    krs_fibration_weight,
    soliton_weight_w,
)

F = Fraction


def test_constructors_and_values():
    v = Weight.exponential([1, 2], coeff=3)
    assert v.value([0, 0]) == pytest.approx(3.0)
    assert v.value([1, 0]) == pytest.approx(3 * math.exp(-1))
    c = Weight.constant(2, F(5, 2))
    assert c.value([9, 9]) == 2.5
    p = Weight.from_polynomial(Polynomial.affine([1], 2), decay=[1])
    assert p.value([0]) == pytest.approx(2.0)
    assert p.value([1]) == pytest.approx(3 * math.exp(-1))


def test_value_exact_is_exactexp():
    v = Weight.exponential([1])
    ex = v.value_exact([F(2)])
    assert ex == ExactExp({F(-2): F(1)})
    assert float(ex) == pytest.approx(math.exp(-2), rel=1e-15)


def test_arithmetic():
    v = Weight.exponential([1])
    w = Weight.constant(1, 2)
    s = v + w
    assert s.value([0]) == pytest.approx(3.0)
    d = v - v
    assert d.is_zero()
    prod = v * v
    assert prod.value([1]) == pytest.approx(math.exp(-2))
    scaled = v * F(1, 2)
    assert scaled.value([0]) == 0.5
    pmul = v * Polynomial.affine([1], 0)
    assert pmul.value([2]) == pytest.approx(2 * math.exp(-2))


def test_canonicalization_merges_terms():
    x = Polynomial.variable(0, 1)
    a = Weight(1, [WeightTerm(x, (), (F(1),))])
    b = Weight(1, [WeightTerm(x, (), (F(1),))])
    s = a + b
    assert len(s.terms) == 1
    assert s == Weight(1, [WeightTerm(2 * x, (), (F(1),))])


def test_differentiate_exponential_polynomial():
    # d/dx [(x + 2) e^{-x}] = (1 - x - 2) e^{-x} = (-1 - x) e^{-x}
    v = Weight.from_polynomial(Polynomial.affine([1], 2), decay=[1])
    dv = v.differentiate(0)
    for x in (0.0, 1.0, 2.5):
        assert dv.value([x]) == pytest.approx((-1 - x) * math.exp(-x), rel=1e-13)


def test_grad_hess_match_finite_differences():
    v = Weight.exponential([1, 2]) + Weight.from_polynomial(
        Polynomial.variable(0, 2) * Polynomial.variable(1, 2), decay=[1, 1]
    )
    x = np.array([0.3, 0.7])
    h = 1e-6
    g = v.grad(x)
    for i in range(2):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fd = (v.value(xp) - v.value(xm)) / (2 * h)
        assert g[i] == pytest.approx(fd, rel=1e-7, abs=1e-9)
    H = v.hess(x)
    assert H[0, 1] == pytest.approx(H[1, 0], rel=1e-12)


def test_rational_factor_term():
    x = Polynomial.variable(0, 1)
    base = x**4 + Polynomial.constant(1, 2)
    w = Weight(1, [WeightTerm(x, ((base, -1),), (F(1, 2),))])
    assert w.has_rational_factors()
    t = 1.3
    want = t / (2 + t**4) * math.exp(-t / 2)
    assert w.value([t]) == pytest.approx(want, rel=1e-13)


def test_pullback_affine():
    # restrict e^{-x1-x2} to the segment x = (t, 1-t): constant e^{-1}
    v = Weight.exponential([1, 1])
    r = v.pullback_affine([[1], [-1]], [0, 1])
    assert r.nvars == 1
    for t in (0.0, 0.5, 2.0):
        assert r.value([t]) == pytest.approx(math.exp(-1), rel=1e-13)


def test_decay_vectors_and_degree():
    v = Weight.from_polynomial(
        Polynomial.variable(0, 2) ** 3, decay=[1, 2]
    ) + Weight.exponential([1, 1])
    assert (F(1), F(2)) in v.decay_vectors()
    assert v.max_poly_degree() == 3


def test_json_round_trip():
    x = Polynomial.variable(0, 2)
    base = x**2 + Polynomial.constant(2, 1)
    w = Weight(
        2,
        [
            WeightTerm(x, ((base, -1),), (F(1, 2), F(1)), shift=F(1, 3)),
            WeightTerm(Polynomial.constant(2, 2), (), (F(0), F(0))),
        ],
    )
    w2 = Weight.from_json(w.to_json())
    assert w2 == w


def test_soliton_weight_flat_model():
    # v = e^{-x} on the line: w = 2(v + x v') = 2(1 - x)e^{-x}
    v = Weight.exponential([1])
    w = soliton_weight_w(v)
    for x in (-1.0, 0.0, 1.0, 3.0):
        assert w.value([x]) == pytest.approx(2 * (1 - x) * math.exp(-x), rel=1e-13)
    # explicit n overrides the ambient dimension count
    w3 = soliton_weight_w(v, 3)
    assert w3.value([0.0]) == pytest.approx(6.0)


def test_fibration_transform_line_bundle():
    # p(x) = x + 2 with multiplicity 1 and twist s = 3 on [-1, inf)
    v = Weight.exponential([1])
    w = soliton_weight_w(v)
    vt, wt = fibration_transform(v, w, [([1], 2, 1, F(3))], polyhedron=half_line(-1))
    for x in (-0.9, 0.0, 1.0, 4.0):
        assert vt.value([x]) == pytest.approx((x + 2) * math.exp(-x), rel=1e-12)
        want = (2 * (1 - x) * (x + 2) - 3) * math.exp(-x)
        assert wt.value([x]) == pytest.approx(want, rel=1e-11, abs=1e-13)


def test_fibration_factor_must_be_positive():
    v = Weight.exponential([1])
    w = soliton_weight_w(v)
    with pytest.raises(FactorNotPositive):
        fibration_transform(v, w, [([1], 1, 1, F(1))], polyhedron=half_line(-1))
    with pytest.raises(FactorNotPositive):
        # negative slope becomes negative far out on the half line
        fibration_transform(v, w, [([-1], 5, 1, F(1))], polyhedron=half_line(-1))


def test_krs_fibration_weight():
    P = orthant_shifted(2)
    v = krs_fibration_weight([([1, 0], 2, 1)], [1, 1], polyhedron=P)
    for x in ((0.0, 0.0), (1.0, 2.0)):
        want = (x[0] + 2) * math.exp(-x[0] - x[1])
        assert v.value(x) == pytest.approx(want, rel=1e-13)
    with pytest.raises(FactorNotPositive):
        krs_fibration_weight([([1, 0], 1, 1)], [1, 1], polyhedron=P)


def test_check_class_w_flat_pair():
    # w/v^0.9 = 2(1-x)e^{-0.1x} is bounded; at beta* = 1 the ratio grows
    P = half_line(-1)
    v = Weight.exponential([1])
    w = soliton_weight_w(v)
    rep = check_class_W(v, w, P, beta_star=0.9)
    assert rep.passed, rep
    assert rep.to_dict()["passed"] is True
    assert abs(rep.decay_rate - 1.0) < 0.1
    rep1 = check_class_W(v, w, P, beta_star=1)
    assert not rep1.passed


def test_check_class_w_flags_slow_w_decay():
    # w = e^{-x/2} decays slower than v^{0.9}
    P = half_line(-1)
    v = Weight.exponential([1])
    w_slow = Weight.exponential([F(1, 2)])
    rep = check_class_W(v, w_slow, P, beta_star=0.9)
    assert not rep.passed


def test_check_class_w_needs_decay():
    # constant v has no decay rate to fit
    P = half_line(-1)
    rep = check_class_W(
        Weight.constant(1, 1), Weight.constant(1, 2), P, beta_star=0.9
    )
    assert not rep.passed
