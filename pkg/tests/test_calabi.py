"""Half-line profile solutions and the Li-type soliton asymptotics."""
import math
from fractions import Fraction

import numpy as np
import pytest

from wkstab.calabi import (
    PolyExp,
    crease_profile_identity,
    existence_verdict,
    li_C0,
    li_G,
    li_decay_check,
    li_profile,
    li_tail_envelope,
    line_bundle_weights,
    profile_solve,
    profile_solve_decaying,
)
from wkstab.errors import AffineFutakiNonzero, DivergentIntegral, PoleOnDomain
from wkstab.polynomials import Polynomial
from wkstab.weights import Weight

F = Fraction

V_FLAT = Weight.exponential([1])
W_FLAT = Weight.from_polynomial(Polynomial.affine([-2], 2), decay=[1])


def test_polyexp_arithmetic():
    pe = PolyExp({0: [1, 2], F(1): [3]})  # 1 + 2x + 3 e^{-x}
    assert pe.value(0.0) == pytest.approx(4.0, abs=1e-15)
    assert pe.derivative().value(0.0) == pytest.approx(-1.0)
    anti = pe.antiderivative()
    assert (anti.derivative() - pe).is_zero()


def test_flat_profile_symbolic():
    sol = profile_solve(V_FLAT, W_FLAT)
    assert sol.exact
    # v Theta = (2x + 2) e^{-x} exactly
    assert sol.vtheta.terms == PolyExp({1: [2, 2]}).terms
    assert sol.boundary_residuals == (0.0, 0.0)
    assert sol.ode_residual().is_zero()
    for x in (-1.0, 0.0, 1.0, 3.0, 10.0):
        assert sol.theta(x) == pytest.approx(2 * (1 + x), abs=1e-12)
    assert sol.positivity.positive and sol.positivity.certified


def test_harmonic_branch():
    # v = 1, w = 0: v Theta = 2(1 + x)
    sol = profile_solve(Weight.constant(1, 1), Weight.constant(1, 0))
    assert sol.vtheta.terms == PolyExp({0: [2, 2]}).terms
    assert sol.theta(3.0) == pytest.approx(8.0, abs=1e-12)
    assert sol.positivity.positive and sol.positivity.certified


def test_quadratic_positivity_failure():
    # v = x + 2, w = 2: v Theta = 1 - x^2 crosses zero at x = 1
    v = Weight.from_polynomial(Polynomial.affine([1], 2))
    w = Weight.constant(1, 2)
    sol = profile_solve(v, w)
    assert sol.vtheta.terms == PolyExp({0: [1, 0, -1]}).terms
    assert not sol.positivity.positive
    assert sol.positivity.certified
    assert sol.positivity.first_nonpositive == pytest.approx(1.0, abs=1e-9)
    verdict = existence_verdict(v, w)
    assert verdict.kind == "FailsPositivityAt"
    assert verdict.x_star == pytest.approx(1.0, abs=1e-9)


def test_decaying_route_agrees():
    sold = profile_solve_decaying(V_FLAT, W_FLAT)
    sol = profile_solve(V_FLAT, W_FLAT)
    assert sold.vtheta.terms == sol.vtheta.terms


def test_decaying_route_gates():
    # scaled w breaks the affine futaki invariants
    w_scaled = Weight.from_polynomial(Polynomial.affine([-4], 4), decay=[1])
    with pytest.raises(AffineFutakiNonzero):
        profile_solve_decaying(V_FLAT, w_scaled)
    # growing w has no decaying tail integral
    with pytest.raises(DivergentIntegral):
        profile_solve_decaying(V_FLAT, Weight.exponential([-1]))


def test_pole_gate():
    # v = x - 1 vanishes inside the domain
    v_bad = Weight.from_polynomial(Polynomial.affine([1], -1))
    with pytest.raises(PoleOnDomain):
        profile_solve(v_bad, Weight.constant(1, 2))


def test_exists_for_nonpositive_w():
    verdict = existence_verdict(V_FLAT, Weight.exponential([1], -1))
    assert verdict.kind == "Exists"


def test_crease_profile_identity_flat():
    rep = crease_profile_identity(V_FLAT, W_FLAT, x0_grid=(0, 1, 2))
    assert rep.max_residual < 1e-10
    expected = [2.0, 4.0 * math.exp(-1), 6.0 * math.exp(-2)]
    for (x0, fval, err, rhs), want in zip(rep.rows, expected):
        assert fval == pytest.approx(want, abs=1e-9)
        assert rhs == pytest.approx(want, abs=1e-12)


def test_line_bundle_weights():
    # p(x) = x + 2, n_a = 1, twist s = 3
    vt, wt = line_bundle_weights(V_FLAT, W_FLAT, [(1, 2, 1, F(3))])
    pts = np.linspace(-0.9, 5.0, 7).reshape(-1, 1)
    xs = pts[:, 0]
    assert np.allclose(vt.value_array(pts), (xs + 2) * np.exp(-xs), atol=1e-12)
    want = (2 * (1 - xs) * (xs + 2) - 3.0) * np.exp(-xs)
    assert np.allclose(wt.value_array(pts), want, atol=1e-12)


def test_li_profile_structure():
    prof = li_profile(1, 1, 3, 1, 1)
    assert prof.p == 2
    assert prof.h_fraction(0) == -1
    assert prof.F_fraction(1) == F(11, 2)
    assert prof.h.as_univariate() == [F(-1), F(1), F(2)]
    assert prof.F_num.as_univariate() == [F(4), F(5), F(2)]
    assert prof.F_den.as_univariate() == [F(1), F(1)]
    # F grows like p phi
    for phi in (1e2, 1e3, 1e4):
        assert abs(prof.F_value(phi) / phi - 2.0) < 5.0 / phi


def test_li_profile_leading_coefficient():
    prof = li_profile(1, 1, 3, 1, 1)
    d, k = prof.d, prof.k
    ncoef = prof.F_num.as_univariate()
    lead = ncoef[-1] * prof.mu ** (d + k + 1)
    want = (prof.tau - k * prof.kappa) * prof.kappa**d * prof.mu ** (d + k)
    assert len(ncoef) - 1 == d + k
    assert lead == want


def test_li_G_against_riemann_sum():
    prof = li_profile(1, 1, 3, 1, 1)
    assert li_G(prof, 1.0, 1.0) == 0.0
    g2 = li_G(prof, 1.0, 2.0)
    us = np.linspace(1.0, 2.0, 200001)
    f = -(3 * us + 4) / (2 * us * (2 * us**2 + 5 * us + 4))
    assert g2 == pytest.approx(np.trapezoid(f, us), abs=1e-8)


def test_li_G_pole_handling():
    prof = li_profile(1, 1, 3, 1, 1)
    with pytest.raises(ValueError):
        li_G(prof, 0.5, -2.0)
    bad = li_profile(1, 1, 3, 1, 5)  # mu = 5 pushes a root of N into range
    assert any("mu != 1" in n for n in bad.notes)
    with pytest.raises(PoleOnDomain):
        li_G(bad, 0.01, 2.0)


def test_li_C0_cauchy_within_envelope():
    prof = li_profile(1, 1, 3, 1, 1)
    rep100 = li_C0(prof, 1.0, Phi=1e2)
    rep1k = li_C0(prof, 1.0, Phi=1e3)
    rep10k = li_C0(prof, 1.0, Phi=1e4)
    c0s = [rep100.c0, rep1k.c0, rep10k.c0]
    assert abs(c0s[0] - c0s[1]) <= rep100.tail_bound + rep100.truncation_estimate
    assert abs(c0s[1] - c0s[2]) <= rep1k.tail_bound + rep1k.truncation_estimate
    assert abs(c0s[1] - c0s[2]) < 1e-12
    env = li_tail_envelope(prof, 1e3)
    assert 0 < env < 1e-2
    # frozen value for regression
    assert rep10k.c0 == pytest.approx(-0.48022039401802374, abs=1e-9)


def test_li_decay_fit():
    prof = li_profile(1, 1, 3, 1, 1)
    dec = li_decay_check(prof, phi0=1.0, s0=1.0)
    assert -2.2 < dec.slope < -1.8
    assert dec.monotone
    assert dec.max_residual < 1e-12
    assert dec.rows[-1][3] < 1e-11
    assert dec.D0 == pytest.approx(1.0776204097172768, abs=1e-9)
