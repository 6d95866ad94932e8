"""Symplectic potentials, the generalized Abreu operator, Legendre duality."""
import math
from fractions import Fraction

import numpy as np
import pytest

from wkstab import expr as ex
from wkstab.errors import NotConvexGrid, NotConvexHere, NotInteriorDirection
from wkstab.geometry import Cone, half_line, orthant_shifted
from wkstab.polynomials import Polynomial
from wkstab.potentials import (
    SymplecticPotential,
    abreu_scal_v,
    abreu_scal_v_fd,
    boundary_checks,
    cone_potential,
    guillemin_potential,
    h_class_check,
    hessian_data,
    legendre,
    mabuchi_energy,
    soliton_residual,
)
from wkstab.weights import AffineForm, Weight, WeightTerm, soliton_weight_w

F = Fraction

P1 = half_line(-1)
P2 = orthant_shifted(2)
U1 = guillemin_potential(P1)
U2 = guillemin_potential(P2)
V1 = Weight.exponential([1])
V2 = Weight.exponential([1, 1])


def test_guillemin_values():
    # (1/2)(x+1)log(x+1): zero at x = 0, e/2 at x = e-1, clamped at the facet
    assert U1.value([0.0]) == pytest.approx(0.0, abs=1e-15)
    assert U1.value([math.e - 1]) == pytest.approx(0.5 * math.e, abs=1e-12)
    assert U1.value([-1.0]) == 0.0


def test_hessian_data_guillemin():
    hd = hessian_data(U1, [0.0])
    assert hd.G[0, 0] == pytest.approx(0.5, abs=1e-14)
    assert hd.H[0, 0] == pytest.approx(2.0, abs=1e-14)
    hd2 = hessian_data(U2, [0.0, 0.0])
    assert np.allclose(hd2.H, np.diag([2.0, 2.0]), atol=1e-13)


def test_quadratic_smooth_part():
    uq = SymplecticPotential(
        2,
        [],
        ex.mul(F(1, 2), ex.add(ex.pow_(ex.Var(0), 2), ex.pow_(ex.Var(1), 2))),
        None,
    )
    assert np.allclose(hessian_data(uq, [0.3, -0.7]).H, np.eye(2), atol=1e-13)


def test_not_convex_here():
    u_bad = SymplecticPotential(1, [], ex.mul(-1, ex.pow_(ex.Var(0), 2)), None)
    with pytest.raises(NotConvexHere):
        hessian_data(u_bad, [0.0])


def test_abreu_flat_oracles():
    # flat model: Scal_v(u0) = 2(n - sum x) e^{-sum x}
    assert abreu_scal_v(U2, V2, [0.0, 0.0]) == pytest.approx(4.0, abs=1e-12)
    assert abreu_scal_v(U1, V1, [1.0]) == pytest.approx(0.0, abs=1e-12)
    w2 = soliton_weight_w(V2)
    for pt in ([0.5, 0.25], [1.5, -0.5], [0.0, 2.0]):
        assert abreu_scal_v(U2, V2, pt) == pytest.approx(
            w2.value(pt), abs=1e-10
        )


def test_abreu_scalar_flat_orthant():
    # u = 1/2 sum x log x on the standard orthant with v = 1 is scalar flat
    orth = orthant_shifted(2, 0)
    uo = guillemin_potential(orth)
    one2 = Weight.constant(2, 1)
    for pt in ([0.5, 1.2], [2.0, 0.1], [3.3, 4.4]):
        assert abs(abreu_scal_v(uo, one2, pt)) < 1e-11


def test_abreu_fd_comparator():
    rng = np.random.default_rng(7)
    for _ in range(25):
        pt = rng.uniform(-0.6, 3.0, size=2)
        a = abreu_scal_v(U2, V2, pt)
        b = abreu_scal_v_fd(U2, V2, pt, h=1e-3)
        assert abs(a - b) / max(abs(a), 1e-8) < 1e-4


def test_soliton_residual_flat():
    rng = np.random.default_rng(7)
    pts = rng.uniform(-0.8, 4.0, size=(60, 2))
    dev, (alpha, beta) = soliton_residual(U2, V2, pts)
    assert dev < 1e-10
    assert alpha == pytest.approx(2 * math.log(2), abs=1e-8)
    assert np.abs(beta).max() < 1e-9
    dev1, (a1, _) = soliton_residual(U1, V1, rng.uniform(-0.9, 5.0, size=(40, 1)))
    assert dev1 < 1e-10
    assert a1 == pytest.approx(math.log(2), abs=1e-8)


def test_soliton_residual_detects_mismatch():
    rng = np.random.default_rng(11)
    vshift = Weight(1, [WeightTerm(Polynomial.affine([1], 2), (), [1])])
    dev, _ = soliton_residual(U1, vshift, rng.uniform(-0.9, 5.0, size=(40, 1)))
    assert dev > 1e-2


def test_soliton_residual_gauge_invariance():
    rng = np.random.default_rng(7)
    pts = rng.uniform(-0.8, 4.0, size=(60, 2))
    dev, _ = soliton_residual(U2, V2, pts)
    devg, _ = soliton_residual(U2.add_affine([3, -2], 5), V2, pts)
    assert devg == pytest.approx(dev, abs=1e-9)


def test_cone_potential():
    C = Cone(2, [(1, 0), (0, 1)])
    uc = cone_potential(C)
    assert len(uc.log_terms) == 2
    # b on the boundary pattern L_b = L_inf: same terms
    assert cone_potential(C, (1, 1)).log_terms == uc.log_terms
    with pytest.raises(NotInteriorDirection):
        cone_potential(C, (1, -1))


def test_cone_potential_homogeneity():
    # H(tx) = t H(x), including a genuine Reeb direction
    C = Cone(2, [(1, 0), (0, 1)])
    x0 = np.array([0.7, 1.9])
    for b in (None, (2, 3)):
        uc = cone_potential(C) if b is None else cone_potential(C, b)
        H0 = hessian_data(uc, x0).H
        for t in (2.0, 5.0):
            Ht = hessian_data(uc, t * x0).H
            assert np.abs(Ht - t * H0).max() < 1e-10


def test_boundary_checks_guillemin():
    rep = boundary_checks(U1, P1)
    assert rep.passed, rep.to_dict()
    rep2 = boundary_checks(U2, P2)
    assert rep2.passed
    assert abs(rep2.entries[0]["h_rate"] - 1.0) < 0.05


def test_boundary_checks_catch_wrong_coefficient():
    # (x+1)log(x+1) has H' -> 1 along the facet, not the required 2
    u_bad = SymplecticPotential(1, [(AffineForm((1,), 1), 1)], None, P1)
    rep = boundary_checks(u_bad, P1)
    assert not rep.passed
    assert rep.entries[0]["grad_limit"][0] == pytest.approx(1.0, abs=1e-3)


def test_legendre_quadratic_selfdual():
    res = legendre(lambda p: 0.5 * (p**2).sum(axis=1), [(-2, 2)], 0.1)
    assert res.u_at([0.55]) == pytest.approx(0.5 * 0.55**2, abs=0.51 * 0.01 + 1e-12)
    assert res.roundtrip_node_error() < 1e-12
    assert res.roundtrip_max_error() < 0.2 * 0.1


def test_legendre_exponential():
    res = legendre(lambda p: np.exp(p[:, 0]), [(-1, 2)], 0.05)
    for xi in (0.0, 0.5, 1.0):
        assert res.inverse_at([xi]) == pytest.approx(math.exp(xi), abs=0.01)
    # conjugate of e^xi is x log x - x on the gradient image
    k = np.argmin(np.abs(res.x[:, 0] - 1.5))
    xk = res.x[k, 0]
    assert res.u[k] == pytest.approx(xk * math.log(xk) - xk, abs=1e-3)


def test_legendre_refinement_converges():
    errs = [
        legendre(lambda p: np.exp(p[:, 0]), [(-1, 2)], h).roundtrip_max_error()
        for h in (0.1, 0.05, 0.025)
    ]
    assert errs[1] < 0.75 * errs[0]
    assert errs[2] < 0.75 * errs[1]


def test_legendre_rejects_concave():
    with pytest.raises(NotConvexGrid):
        legendre(lambda p: -((p**2).sum(axis=1)), [(-1, 1)], 0.1)


def test_legendre_2d_quadratic():
    res = legendre(
        lambda p: 0.5 * (p**2).sum(axis=1), [(-1.5, 1.5), (-1.5, 1.5)], 0.25
    )
    assert res.roundtrip_node_error() < 1e-12
    assert res.roundtrip_max_error() < 0.25**2


def test_h_class_flat_passes():
    for eps in (0.1, 0.3):
        rep = h_class_check(U2, V2, P2, eps, sample_budget=240)
        assert rep.passed, rep.to_dict()


def test_h_class_constant_v_fails():
    one2 = Weight.constant(2, 1)
    rep = h_class_check(U2, one2, P2, 0.1, sample_budget=240)
    assert not rep.passed
    assert not rep.conditions["h_norm"]["finite"]


def test_mabuchi_energy_flat():
    w1 = soliton_weight_w(V1)
    m0 = mabuchi_energy(P1, V1, w1, U1, U1, rel_tol=1e-8, abs_tol=1e-9)
    assert m0 == pytest.approx(math.e, abs=1e-6)
    # affine gauge leaves the energy unchanged when the affine futaki vanishes
    m1 = mabuchi_energy(
        P1, V1, w1, U1.add_affine([2], 3), U1, rel_tol=1e-8, abs_tol=1e-9
    )
    assert m1 == pytest.approx(m0, abs=1e-6)
