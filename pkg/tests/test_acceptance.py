"""End-to-end acceptance gate.

One test per advertised guarantee, run at the stated tolerance, so a
verbose run prints exactly one pass/fail line per guarantee.  Stated
runtime budgets are asserted inside the test bodies.
"""
import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from wkstab.calabi import (
    PolyExp,
    crease_profile_identity,
    li_C0,
    li_G,
    li_decay_check,
    li_profile,
    li_tail_envelope,
    profile_solve,
)
from wkstab.geometry import (
    Cone,
    HalfSpace,
    Polyhedron,
    box,
    half_line,
    orthant_shifted,
)
from wkstab.pl import (
    AffineForm,
    PiecewiseLinearConvex,
    f_x0,
    simple_crease,
)
from wkstab.polynomials import Polynomial
from wkstab.potentials import (
    abreu_scal_v,
    guillemin_potential,
    h_class_check,
    legendre,
    soliton_residual,
)
from wkstab.quadrature import integrate_boundary, integrate_interior
from wkstab.rational import hyperplane_measure_scale, lattice_kernel_basis
from wkstab.stability import (
    crease_identity_check,
    find_c_lambda,
    futaki,
    futaki_affine,
    futaki_v_vector,
    normalize_w_scale,
    semistability_scan,
    soliton_futaki_identity_check,
)
from wkstab.stability import _half_line_weight
from wkstab.weights import Weight, WeightTerm, soliton_weight_w

F = Fraction

P1 = half_line(-1)
V1 = Weight.exponential([1])
W1 = soliton_weight_w(V1)
P2 = orthant_shifted(2)
V2 = Weight.exponential([1, 1])
W2 = soliton_weight_w(V2)


def _done(k, t0, limit, msg):
    dt = time.perf_counter() - t0
    print(f"criterion {k}: PASS ({dt:.2f}s) {msg}")
    if limit is not None:
        assert dt < limit, f"criterion {k} took {dt:.2f}s, budget {limit}s"


def test_criterion_1_flat_line_model():
    t0 = time.perf_counter()
    aff = futaki_affine(P1, V1, W1, method="exact")
    assert all(r.exact is not None for r in aff)
    assert all(abs(r.value) < 1e-10 for r in aff)
    ada = futaki_affine(
        P1, V1, W1, method="adaptive", rel_tol=1e-8, abs_tol=1e-9
    )
    assert all(abs(r.value) < 1e-6 for r in ada)

    sol = profile_solve(V1, W1)
    assert sol.exact
    # v*Theta = (2 + 2x) e^{-x}, i.e. Theta(x) = 2(x + 1)
    assert sol.vtheta.terms == PolyExp({1: [2, 2]}).terms
    assert sol.boundary_residuals == (0.0, 0.0)
    resid = sol.ode_residual()
    assert resid is not None and all(
        all(c == 0 for c in poly) for poly in resid.terms.values()
    )
    assert sol.positivity.certified

    for x0 in (0, 1, 2):
        Fv = futaki(P1, V1, W1, f_x0(x0), method="exact")
        want = 2.0 * (x0 + 1) * math.exp(-x0)
        assert abs(Fv.value - want) < 1e-10

    rep = crease_profile_identity(V1, W1)
    assert rep.max_residual < 1e-10
    _done(1, t0, 1.0, f"crease/profile residual {rep.max_residual:.2e}")


def test_criterion_2_flat_soliton_n_1_2_3():
    t0 = time.perf_counter()
    for n in (1, 2, 3):
        P = orthant_shifted(n)
        u = guillemin_potential(P)
        v = Weight.exponential([1] * n)
        rng = np.random.default_rng(100 + n)
        pts = rng.uniform(-0.9, 4.0, size=(100, n))
        for x in pts:
            s = float(x.sum())
            want = 2.0 * (n - s) * math.exp(-s)
            got = abreu_scal_v(u, v, x)
            assert abs(got - want) <= 1e-6 * abs(want) + 1e-9, (n, x)
        dev, (alpha, beta) = soliton_residual(u, v, pts)
        assert dev < 1e-10
        assert alpha == pytest.approx(n * math.log(2), abs=1e-8)
        assert np.abs(beta).max() < 1e-8
        rep = soliton_futaki_identity_check(P, v)
        assert rep.holds and rep.consistent and rep.anticanonical
        vv = futaki_v_vector(P, v)
        assert all(abs(r.value) < 1e-8 for r in vv)
    _done(2, t0, 10.0, "n = 1, 2, 3")


def test_criterion_3_nonexistence_pipeline():
    t0 = time.perf_counter()
    # 1D building block vanishes exactly
    x = Polynomial.variable(0, 1)
    blk = Weight(
        1,
        [
            WeightTerm(
                (x**2 + Polynomial.constant(1, 1))
                * (x - Polynomial.constant(1, 1)),
                (),
                (F(1),),
            )
        ],
    )
    res = integrate_interior(P1, blk, method="exact")
    assert res.value == 0.0 and float(res.exact) == 0.0

    x1 = Polynomial.variable(0, 2)
    x2 = Polynomial.variable(1, 2)
    q1 = x1**2 * x2**2 + Polynomial.constant(2, 1)
    v = Weight(2, [WeightTerm(q1, (), (F(1), F(1)))])
    bmass = integrate_boundary(P2, v, rel_tol=1e-12, abs_tol=1e-14)
    assert abs(bmass.value - 4.0 * math.e**2) < 1e-8

    lam = F(1, 2)
    c = find_c_lambda(0.5)
    resc = integrate_interior(
        P1, _half_line_weight(c, 0.5), rel_tol=1e-10, abs_tol=1e-12
    )
    assert abs(resc.value) < 1e-8

    cq = F(c)
    b1 = x1**4 + Polynomial.constant(2, cq)
    b2 = x2**4 + Polynomial.constant(2, cq)
    q2 = Weight(
        2,
        [WeightTerm(Polynomial.constant(2, 1), ((b1, -1), (b2, -1)), (lam, lam))],
    )
    a = normalize_w_scale(P2, v, q2, rel_tol=1e-10, abs_tol=1e-12)
    w = q2 * F(a)
    aff = futaki_affine(P2, v, w, rel_tol=1e-8, abs_tol=2e-7)
    assert abs(aff[0].value) < 1e-8
    assert abs(aff[1].value) < 1e-6 and abs(aff[2].value) < 1e-6

    verdict = semistability_scan(P2, v, w, budget=40, rel_tol=1e-6, abs_tol=1e-8)
    assert verdict.kind == "Destabilizer"
    assert verdict.value < 0 and verdict.value + 2 * verdict.error < 0
    _done(3, t0, 60.0, f"destabilizer F = {verdict.value:.4g}")


def test_criterion_4_crease_sum_identity():
    t0 = time.perf_counter()
    U1 = guillemin_potential(P1)
    U2 = guillemin_potential(P2)
    two_crease_1d = PiecewiseLinearConvex(
        [AffineForm([-2], 1), AffineForm([-1], 1), AffineForm([0], 0)],
        prune=False,
    )
    two_crease_2d = PiecewiseLinearConvex(
        [AffineForm([0, 0], 0), AffineForm([-1, 0], 0), AffineForm([0, -1], 0)],
        prune=False,
    )
    worst = 0.0
    for f in (f_x0(1), simple_crease([-1], 0), two_crease_1d):
        r = crease_identity_check(P1, V1, W1, U1, f, rel_tol=1e-6, abs_tol=1e-8)
        assert r < 1e-4, r
        worst = max(worst, r)
    for f in (
        simple_crease([-1, 0], 0),
        simple_crease([-1, 0], F(1, 2)),
        two_crease_2d,
    ):
        r = crease_identity_check(P2, V2, W2, U2, f, rel_tol=1e-6, abs_tol=1e-8)
        assert r < 1e-4, r
        worst = max(worst, r)
    _done(4, t0, 30.0, f"worst residual {worst:.2e}")


def test_criterion_5_legendre_duality():
    t0 = time.perf_counter()
    quad = legendre(lambda p: 0.5 * (p**2).sum(axis=1), [(-2, 2)], 0.1)
    assert quad.roundtrip_node_error() < 1e-10
    quad2 = legendre(
        lambda p: 0.5 * (p**2).sum(axis=1), [(-1.5, 1.5), (-1.5, 1.5)], 0.25
    )
    assert quad2.roundtrip_node_error() < 1e-10
    errs = [
        legendre(lambda p: np.exp(p[:, 0]), [(-1, 2)], h).roundtrip_max_error()
        for h in (0.1, 0.05, 0.025)
    ]
    assert errs[1] < 0.75 * errs[0]
    assert errs[2] < 0.75 * errs[1]
    assert errs[2] < 1e-3
    _done(5, t0, None, f"refinement errors {[f'{e:.2e}' for e in errs]}")


def test_criterion_6_li_profile():
    t0 = time.perf_counter()
    prof = li_profile(1, 1, 3, 1, 1)
    assert prof.p == 2
    assert prof.F_fraction(1) == F(11, 2)
    phi = 1e4
    assert abs(prof.F_value(phi) / phi - 2.0) < 0.01 * 2.0
    # tail of G is Cauchy inside the analytic envelope
    for Phi in (1e3, 4e3):
        g1 = li_G(prof, 1.0, Phi)
        g2 = li_G(prof, 1.0, 4.0 * Phi)
        assert abs(g2 - g1) <= li_tail_envelope(prof, Phi)
    c0rep = li_C0(prof, 1.0)
    assert abs(c0rep.laurent_tail) <= li_tail_envelope(prof, c0rep.Phi)
    rep = li_decay_check(prof)
    assert -2.2 < rep.slope < -1.8
    _done(6, t0, 30.0, f"decay slope {rep.slope:.4f}")


def test_criterion_7_geometry_suite():
    t0 = time.perf_counter()
    for n in (1, 2, 3):
        assert orthant_shifted(n).is_delzant()
    assert box([(0, 1), (0, 1), (0, 1)]).is_delzant()
    wedge = Polyhedron(2, [HalfSpace((1, 0), 0), HalfSpace((1, 2), 0)])
    assert not wedge.is_delzant()

    rng = random.Random(7)
    for _ in range(20):
        n = rng.choice([1, 2, 3])
        normals = []
        while len(normals) < rng.randint(1, n + 1):
            cand = tuple(rng.randint(-3, 3) for _ in range(n))
            if any(c != 0 for c in cand):
                normals.append(cand)
        C = Cone(n, normals)
        assert C.dual().dual() == C

    rng = random.Random(23)
    for _ in range(20):
        n = rng.choice([2, 3])
        M = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
        for _ in range(4):
            i, j = rng.sample(range(n), 2)
            S = [[1 if a == b else 0 for b in range(n)] for a in range(n)]
            S[i][j] = rng.randint(-2, 2)
            M = [
                [sum(M[r][k] * S[k][c] for k in range(n)) for c in range(n)]
                for r in range(n)
            ]
        P = Polyhedron(
            n,
            [
                HalfSpace(tuple(M[i][j] for j in range(n)), F(rng.randint(1, 3)))
                for i in range(n)
            ],
        )
        assert not P.is_bounded() and P.is_delzant()
        T = P.truncate()
        assert T.is_bounded() and T.contains(P.interior_point())

    # scaling the defining normal by K scales the facet measure by 1/K, exactly
    rng = random.Random(41)
    for _ in range(20):
        n = rng.choice([2, 3])
        normal = tuple(rng.randint(-4, 4) for _ in range(n))
        if all(c == 0 for c in normal):
            normal = (1,) + (0,) * (n - 1)
        basis = lattice_kernel_basis(normal)
        s1 = hyperplane_measure_scale(basis, normal)
        for K in (2, 3, F(7, 2)):
            sK = hyperplane_measure_scale(
                basis, tuple(K * c for c in normal)
            )
            assert sK == s1 / K
    _done(7, t0, None, "delzant / duality / truncation / facet measure")


def test_criterion_8_quadrature_soundness():
    t0 = time.perf_counter()

    def random_weight(rng, n, max_deg):
        terms = {}
        for _ in range(rng.randint(1, 4)):
            expo = tuple(rng.randint(0, max_deg) for _ in range(n))
            terms[expo] = F(rng.randint(-5, 5))
        poly = Polynomial(n, terms)
        if poly.is_zero():
            poly = Polynomial.constant(n, 1)
        decay = tuple(F(rng.randint(1, 2)) for _ in range(n))
        return Weight(n, [WeightTerm(poly, (), decay)])

    rng = random.Random(55)
    picks = []
    for _ in range(20):
        w = random_weight(rng, 1, 3)
        ex = integrate_interior(P1, w, method="exact")
        ad = integrate_interior(P1, w, method="adaptive", rel_tol=1e-8, abs_tol=1e-10)
        # 1e-12 relative slack covers rounding the exact value to a float
        assert abs(ad.value - ex.value) <= ad.total_error() + 1e-12 * abs(ex.value)
        picks.append((P1, w))
    rng = random.Random(56)
    for _ in range(20):
        w = random_weight(rng, 2, 2)
        ex = integrate_interior(P2, w, method="exact")
        ad = integrate_interior(P2, w, method="adaptive", rel_tol=1e-7, abs_tol=1e-9)
        assert abs(ad.value - ex.value) <= ad.total_error() + 1e-12 * abs(ex.value)
        picks.append((P2, w))

    for P, w in (picks[0], picks[7], picks[20], picks[31]):
        runs = [
            integrate_interior(
                P, w, method="adaptive", rel_tol=1e-7, abs_tol=1e-9, workers=k
            )
            for k in (1, 2, 8)
        ]
        assert runs[0].value == runs[1].value == runs[2].value
        assert (
            runs[0].abs_error_bound
            == runs[1].abs_error_bound
            == runs[2].abs_error_bound
        )
    _done(8, t0, None, "40 random integrands, worker-invariant")


def test_criterion_9_weight_class_checks():
    t0 = time.perf_counter()
    U1 = guillemin_potential(P1)
    U2 = guillemin_potential(P2)
    for eps in (0.1, 0.3):
        assert h_class_check(U1, V1, P1, eps, sample_budget=240).passed
        assert h_class_check(U2, V2, P2, eps, sample_budget=240).passed
    ctrl = h_class_check(U2, Weight.constant(2, 1), P2, 0.1, sample_budget=240)
    assert not ctrl.passed
    assert not ctrl.conditions["h_norm"]["finite"]
    _done(9, t0, None, "flat models pass, constant-v control fails")
