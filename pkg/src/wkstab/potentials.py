"""Symplectic potentials and the generalized Abreu operator.

A potential is a sum of boundary log terms c * L log L plus a smooth
closed-form part, so derivatives up to order four are exact and the inverse
Hessian data H together with its first two derivative tensors can be
assembled from identities instead of numerically differentiating an inverse.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import expr as ex
from .errors import (
    NotConvexGrid,
    NotConvexHere,
    NotInteriorDirection,
    SchemaError,
)
from .geometry import Cone, HalfSpace, Polyhedron
from .rational import fr, fr_str, vec
from .weights import AffineForm, Weight, _fit_slope, _sample_points

_NEG_TOL = 1e-9


def _xlogx(t: np.ndarray) -> np.ndarray:
    """t log t extended by 0 at t = 0; raises away from the closure."""
    t = np.asarray(t, dtype=float)
    if (t < -_NEG_TOL).any():
        raise ValueError("potential evaluated outside the domain closure")
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = t[pos] * np.log(t[pos])
    return out


class SymplecticPotential:
    """Convex potential u = sum c_i L_i log L_i + smooth part on a polyhedron."""

    __slots__ = ("nvars", "log_terms", "smooth_part", "domain", "_cache")

    def __init__(self, nvars, log_terms=(), smooth_part=None, domain=None):
        self.nvars = int(nvars)
        merged = {}
        for L, c in log_terms:
            if not isinstance(L, AffineForm):
                L = AffineForm(*L)
            key = (L.b, L.c)
            merged[key] = merged.get(key, Fraction(0)) + fr(c)
        terms = [
            (AffineForm(b, c0), coeff)
            for (b, c0), coeff in merged.items()
            if coeff != 0
        ]
        terms.sort(key=lambda t: (t[0].b, t[0].c))
        self.log_terms = tuple(terms)
        if smooth_part is not None and smooth_part.is_zero():
            smooth_part = None
        self.smooth_part = smooth_part
        self.domain = domain
        self._cache = {(): smooth_part}

    # -- construction helpers ------------------------------------------------

    def add_affine(self, b, c=0) -> "SymplecticPotential":
        extra = ex.affine([fr(x) for x in b], fr(c))
        smooth = extra if self.smooth_part is None else self.smooth_part + extra
        return SymplecticPotential(self.nvars, self.log_terms, smooth, self.domain)

    def __add__(self, other):
        if not isinstance(other, SymplecticPotential):
            return NotImplemented
        smooth = self.smooth_part
        if other.smooth_part is not None:
            smooth = other.smooth_part if smooth is None else smooth + other.smooth_part
        return SymplecticPotential(
            self.nvars,
            self.log_terms + other.log_terms,
            smooth,
            self.domain or other.domain,
        )

    # -- evaluation ----------------------------------------------------------

    def _floats(self):
        bs = np.array(
            [[float(x) for x in L.b] for L, _ in self.log_terms]
        ).reshape(len(self.log_terms), self.nvars)
        cs = np.array([float(L.c) for L, _ in self.log_terms])
        ws = np.array([float(c) for _, c in self.log_terms])
        return bs, cs, ws

    def value_array(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, self.nvars)
        out = np.zeros(pts.shape[0])
        if self.log_terms:
            bs, cs, ws = self._floats()
            out += _xlogx(pts @ bs.T + cs) @ ws
        if self.smooth_part is not None:
            out += self.smooth_part.eval_array(pts)
        return out

    def value(self, x) -> float:
        return float(self.value_array(np.asarray(x, dtype=float).reshape(1, -1))[0])

    def _smooth_deriv(self, seq):
        seq = tuple(sorted(seq))
        if seq not in self._cache:
            prev = self._smooth_deriv(seq[:-1])
            self._cache[seq] = None if prev is None else prev.diff(seq[-1])
        return self._cache[seq]

    def _smooth_tensor(self, order, x):
        n = self.nvars
        out = np.zeros((n,) * order)
        if self.smooth_part is None:
            return out
        values = {}
        for idx in np.ndindex(*out.shape):
            key = tuple(sorted(idx))
            if key not in values:
                d = self._smooth_deriv(key)
                values[key] = 0.0 if d is None or d.is_zero() else d.eval(x)
            out[idx] = values[key]
        return out

    def _term_values(self, x):
        x = np.asarray(x, dtype=float)
        vals = []
        for L, c in self.log_terms:
            lv = float(np.dot([float(b) for b in L.b], x) + float(L.c))
            if lv <= 0:
                raise ValueError(
                    "derivative of a log term needs a strictly interior point"
                )
            vals.append((np.array([float(b) for b in L.b]), float(c), lv))
        return vals

    def grad(self, x) -> np.ndarray:
        out = np.zeros(self.nvars)
        for b, c, lv in self._term_values(x):
            out += c * (np.log(lv) + 1.0) * b
        if self.smooth_part is not None:
            for i in range(self.nvars):
                d = self._smooth_deriv((i,))
                if d is not None and not d.is_zero():
                    out[i] += d.eval(x)
        return out

    def hess(self, x) -> np.ndarray:
        out = np.zeros((self.nvars, self.nvars))
        for b, c, lv in self._term_values(x):
            out += (c / lv) * np.outer(b, b)
        out += self._smooth_tensor(2, x)
        return 0.5 * (out + out.T)

    def third(self, x) -> np.ndarray:
        out = np.zeros((self.nvars,) * 3)
        for b, c, lv in self._term_values(x):
            out += (-c / lv**2) * np.einsum("i,j,k->ijk", b, b, b)
        out += self._smooth_tensor(3, x)
        return out

    def fourth(self, x) -> np.ndarray:
        out = np.zeros((self.nvars,) * 4)
        for b, c, lv in self._term_values(x):
            out += (2.0 * c / lv**3) * np.einsum("i,j,k,l->ijkl", b, b, b, b)
        out += self._smooth_tensor(4, x)
        return out

    # -- serialization -------------------------------------------------------

    def to_json(self):
        data = {
            "log_terms": [
                {"L": L.to_json(), "coeff": fr_str(c)} for L, c in self.log_terms
            ],
            "smooth": None
            if self.smooth_part is None
            else ex.to_json(self.smooth_part),
        }
        return data

    @classmethod
    def from_json(cls, data, domain=None, nvars=None):
        try:
            terms = [
                (AffineForm.from_json(t["L"]), fr(t["coeff"]))
                for t in data["log_terms"]
            ]
            smooth = data.get("smooth")
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"bad potential payload: {exc}") from exc
        if nvars is None:
            if terms:
                nvars = len(terms[0][0].b)
            elif domain is not None:
                nvars = domain.dim
            else:
                raise SchemaError("cannot infer dimension of a smooth potential")
        smooth_expr = None if smooth is None else ex.from_json(smooth)
        return cls(nvars, terms, smooth_expr, domain)

    def __repr__(self):
        return (
            f"SymplecticPotential(nvars={self.nvars}, "
            f"log_terms={len(self.log_terms)}, "
            f"smooth={self.smooth_part is not None})"
        )


def guillemin_potential(P: Polyhedron) -> SymplecticPotential:
    """(1/2) sum (L_i + a_i) log(L_i + a_i) over the facet inequalities."""
    terms = [
        (AffineForm(h.normal, h.offset), Fraction(1, 2)) for h in P.halfspaces
    ]
    return SymplecticPotential(P.dim, terms, None, P)


def cone_potential(C, b=None) -> SymplecticPotential:
    """Guillemin potential of a cone, optionally shifted by a Reeb direction.

    With b given, adds (1/2) L_b log L_b - (1/2) L_inf log L_inf where L_inf
    is the sum of the facet forms; b must pair positively with every ray.
    """
    if isinstance(C, Polyhedron):
        if any(h.offset != 0 for h in C.halfspaces):
            raise ValueError("cone potential needs a polyhedron with zero offsets")
        cone = Cone(C.dim, [h.normal for h in C.halfspaces])
    else:
        cone = C
    dim = cone.dim
    domain = Polyhedron(
        dim, [HalfSpace.from_rational(nu, 0) for nu in cone.normals]
    )
    terms = [(AffineForm(nu, 0), Fraction(1, 2)) for nu in cone.normals]
    if b is not None:
        b = vec(b)
        if not cone.dual().interior_contains(b):
            raise NotInteriorDirection(
                "direction must pair strictly positively with every cone ray",
                direction=[float(x) for x in b],
            )
        total = tuple(
            sum(nu[i] for nu in cone.normals) for i in range(dim)
        )
        terms.append((AffineForm(b, 0), Fraction(1, 2)))
        terms.append((AffineForm(total, 0), Fraction(-1, 2)))
    return SymplecticPotential(dim, terms, None, domain)


class HessianData:
    """G = Hess(u) and H = G^{-1} at a point, with derivative tensors.

    dH[k] is the matrix of H_{ij,k}, assembled from dH = -H dG H; d2H[k,l]
    uses the second identity so no inverse is ever differentiated
    numerically.
    """

    __slots__ = ("potential", "point", "G", "H", "_t3", "_t4", "_dH", "_d2H")

    def __init__(self, u: SymplecticPotential, x):
        self.potential = u
        self.point = np.asarray(x, dtype=float).reshape(u.nvars)
        G = u.hess(self.point)
        try:
            np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            raise NotConvexHere(
                "Hessian has a nonpositive eigenvalue",
                point=[float(c) for c in self.point],
            )
        n = G.shape[0]
        H = np.linalg.inv(G)
        H = H @ (2 * np.eye(n) - G @ H)
        self.G = G
        self.H = 0.5 * (H + H.T)
        resid = float(np.abs(G @ self.H - np.eye(n)).max())
        if resid > 1e-10:
            raise NotConvexHere(
                "Hessian too ill-conditioned to invert reliably", residual=resid
            )
        self._t3 = None
        self._t4 = None
        self._dH = None
        self._d2H = None

    @property
    def third(self):
        if self._t3 is None:
            self._t3 = self.potential.third(self.point)
        return self._t3

    @property
    def fourth(self):
        if self._t4 is None:
            self._t4 = self.potential.fourth(self.point)
        return self._t4

    @property
    def dH(self):
        """(n, n, n) array with dH[k, i, j] = H_{ij,k}."""
        if self._dH is None:
            hdg = np.einsum("ia,kab->kib", self.H, self.third)
            self._dH = -np.einsum("kib,bj->kij", hdg, self.H)
        return self._dH

    @property
    def d2H(self):
        """(n, n, n, n) array with d2H[k, l, i, j] = H_{ij,kl}."""
        if self._d2H is None:
            H = self.H
            hdg = np.einsum("ia,kab->kib", H, self.third)
            cross = np.einsum("lia,kab,bj->klij", hdg, hdg, H)
            quartic = np.einsum("ia,klab,bj->klij", H, self.fourth, H)
            self._d2H = cross + np.transpose(cross, (1, 0, 2, 3)) - quartic
        return self._d2H


def hessian_data(u: SymplecticPotential, x) -> HessianData:
    return HessianData(u, x)


def abreu_scal_v(u: SymplecticPotential, v: Weight, x) -> float:
    """Weighted scalar curvature -sum_ij (v H_ij)_{,ij} at an interior point."""
    hd = HessianData(u, x)
    x = hd.point
    vv = v.value(x)
    g = v.grad(x)
    hs = v.hess(x)
    dH = hd.dH
    t1 = float(np.einsum("ij,ij->", hs, hd.H))
    t2 = float(np.einsum("i,jij->", g, dH))
    t3 = float(np.einsum("j,iij->", g, dH))
    t4 = vv * float(np.einsum("ijij->", hd.d2H))
    return -(t1 + t2 + t3 + t4)


def abreu_scal_v_fd(u: SymplecticPotential, v: Weight, x, h=1e-3) -> float:
    """Nested central-difference evaluation of the same operator.

    Independent of the dH/d2H identities; callers must keep x at distance
    > 2h from the boundary.
    """
    x = np.asarray(x, dtype=float)
    n = x.size

    def m(y):
        return v.value(y) * np.linalg.inv(u.hess(y))

    total = 0.0
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        for j in range(n):
            if i == j:
                val = (m(x + ei)[i, i] - 2 * m(x)[i, i] + m(x - ei)[i, i]) / h**2
            else:
                ej = np.zeros(n)
                ej[j] = h
                val = (
                    m(x + ei + ej)[i, j]
                    - m(x + ei - ej)[i, j]
                    - m(x - ei + ej)[i, j]
                    + m(x - ei - ej)[i, j]
                ) / (4 * h**2)
            total += val
    return -total


def soliton_residual(u: SymplecticPotential, v: Weight, samples):
    """Deviation of rho_u + log v from its best-fit affine function.

    rho_u = 2(<grad u, x> - u) - log det Hess(u).  A zero deviation means u
    solves the soliton equation up to the affine normalization freedom.
    Returns (max abs deviation, (alpha, beta)) for the fit alpha + <beta, x>.
    """
    pts = np.asarray(samples, dtype=float).reshape(-1, u.nvars)
    r = np.empty(pts.shape[0])
    for k, x in enumerate(pts):
        G = u.hess(x)
        sign, logdet = np.linalg.slogdet(G)
        if sign <= 0:
            raise NotConvexHere(
                "Hessian not positive at a sample", point=[float(c) for c in x]
            )
        rho = 2.0 * (float(u.grad(x) @ x) - u.value(x)) - logdet
        r[k] = rho + np.log(v.value(x))
    A = np.hstack([np.ones((pts.shape[0], 1)), pts])
    coeffs, *_ = np.linalg.lstsq(A, r, rcond=None)
    dev = float(np.abs(r - A @ coeffs).max())
    return dev, (float(coeffs[0]), coeffs[1:].copy())


# -- Legendre bridge ---------------------------------------------------------


@dataclass
class LegendreResult:
    """Discrete Legendre transform data.

    ``x``/``u`` sample the conjugate at the image points x = grad phi(xi)
    over interior grid nodes; ``u_at`` is the discrete conjugate sup over the
    full grid, ``inverse_at`` transforms back from the image samples.
    """

    xi: np.ndarray
    x: np.ndarray
    u: np.ndarray
    grid: np.ndarray
    phi: np.ndarray
    phi_interior: np.ndarray
    h: float
    phi_fn: object

    def u_at(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        return float((self.grid @ x - self.phi).max())

    def inverse_at(self, xi) -> float:
        xi = np.asarray(xi, dtype=float).reshape(-1)
        return float((self.x @ xi - self.u).max())

    def roundtrip_node_error(self) -> float:
        """At interior nodes the discrete double transform is exact."""
        vals = np.array([self.inverse_at(xi) for xi in self.xi])
        return float(np.abs(vals - self.phi_interior).max())

    def roundtrip_max_error(self) -> float:
        """Double-transform deviation probed at off-node midpoints.

        Between nodes the inverse transform is a supporting-line hull, so
        the gap scales with h; this is the quantity a refinement study
        should watch.
        """
        n = self.xi.shape[1]
        probes = []
        for ax in range(n):
            shift = np.zeros(n)
            shift[ax] = self.h / 2
            probes.append(self.xi + shift[None, :])
        probes = np.vstack(probes)
        worst = 0.0
        for xi in probes:
            truth = float(np.asarray(self.phi_fn(xi.reshape(1, -1))).reshape(-1)[0])
            worst = max(worst, abs(self.inverse_at(xi) - truth))
        return worst


def legendre(phi, box, h) -> LegendreResult:
    """Discrete Legendre transform of a convex handle on a box grid.

    phi is called pointwise on grid nodes; strict convexity is checked by
    axis second differences and, in dimension > 1, finite-difference
    Hessians at interior nodes.  Raises NotConvexGrid otherwise.
    """
    h = float(h)
    axes = []
    for lo, hi in box:
        m = int(round((float(hi) - float(lo)) / h)) + 1
        if m < 5:
            raise ValueError("grid too coarse for central differences")
        axes.append(float(lo) + h * np.arange(m))
    n = len(axes)
    mesh = np.meshgrid(*axes, indexing="ij")
    shape = mesh[0].shape
    grid = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    def phi_vec(pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, n)
        try:
            out = np.asarray(phi(pts), dtype=float).reshape(-1)
            if out.shape[0] != pts.shape[0]:
                raise TypeError
            return out
        except (TypeError, ValueError):
            return np.array([float(phi(p)) for p in pts])

    vals = phi_vec(grid)
    f = vals.reshape(shape)

    for ax in range(n):
        d2 = np.diff(f, 2, axis=ax)
        if not (d2 > 0).all():
            raise NotConvexGrid(
                "second differences not positive along an axis", axis=ax
            )
    interior = tuple(slice(1, -1) for _ in range(n))
    grads = []
    for ax in range(n):
        g = (np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)) / (2 * h)
        grads.append(g[interior].reshape(-1))
    if n > 1:
        hess = np.empty(f[interior].shape + (n, n))
        for a in range(n):
            for b in range(n):
                if a == b:
                    d = (np.roll(f, -1, axis=a) - 2 * f + np.roll(f, 1, axis=a)) / h**2
                else:
                    d = (
                        np.roll(np.roll(f, -1, axis=a), -1, axis=b)
                        - np.roll(np.roll(f, -1, axis=a), 1, axis=b)
                        - np.roll(np.roll(f, 1, axis=a), -1, axis=b)
                        + np.roll(np.roll(f, 1, axis=a), 1, axis=b)
                    ) / (4 * h**2)
                hess[..., a, b] = d[interior]
        flat = hess.reshape(-1, n, n)
        for k in range(flat.shape[0]):
            try:
                np.linalg.cholesky(flat[k])
            except np.linalg.LinAlgError:
                raise NotConvexGrid("finite-difference Hessian not positive-definite")

    xi_int = np.stack([m[interior].reshape(-1) for m in mesh], axis=-1)
    x_img = np.stack(grads, axis=-1)
    phi_int = f[interior].reshape(-1)
    u_img = np.einsum("ki,ki->k", xi_int, x_img) - phi_int
    return LegendreResult(
        xi=xi_int,
        x=x_img,
        u=u_img,
        grid=grid,
        phi=vals,
        phi_interior=phi_int,
        h=h,
        phi_fn=phi_vec,
    )


# -- boundary and class reports ----------------------------------------------


@dataclass
class BoundaryReport:
    entries: list
    passed: bool

    def to_dict(self):
        return {"passed": self.passed, "entries": self.entries}


def boundary_checks(
    u: SymplecticPotential,
    P: Polyhedron,
    facet_samples=None,
    approach=None,
    h_tol=1e-4,
    grad_tol=1e-3,
) -> BoundaryReport:
    """Checks H(nu, .) -> 0 and grad of H(nu, nu) -> 2 nu along facet approaches.

    facet_samples: optional list of (facet_index, point-on-facet); defaults to
    one chart point per facet.  Points must lie in the relative interior of
    their facet so the inward normal segment stays inside P.
    """
    if approach is None:
        approach = [10.0**-k for k in range(1, 7)]
    if facet_samples is None:
        facet_samples = []
        for slc in P.facet_atlas():
            facet_samples.append((slc.parent_index, [float(c) for c in slc.point]))
    entries = []
    passed = True
    for idx, y in facet_samples:
        hspace = P.halfspaces[idx]
        nu = np.array([float(c) for c in hspace.normal])
        y = np.asarray(y, dtype=float)
        ts, hnu_norms, grads = [], [], []
        for t in approach:
            xt = y + t * nu
            if not P.contains([fr(float(c)) for c in xt], strict=True):
                continue
            hd = HessianData(u, xt)
            hnu_norms.append(float(np.linalg.norm(hd.H @ nu)))
            grads.append(np.einsum("kab,a,b->k", hd.dH, nu, nu))
            ts.append(float(t))
        if not ts:
            entries.append({"facet": idx, "skipped": True})
            passed = False
            continue
        rate = _fit_slope(np.log(ts), np.log(np.maximum(hnu_norms, 1e-300)))
        glim = grads[-1]
        h_ok = hnu_norms[-1] <= h_tol
        g_ok = float(np.linalg.norm(glim - 2.0 * nu)) <= grad_tol
        entries.append(
            {
                "facet": idx,
                "point": [float(c) for c in y],
                "normal": [float(c) for c in nu],
                "ts": ts,
                "h_nu_norms": hnu_norms,
                "h_rate": float(rate),
                "grad_limit": [float(c) for c in glim],
                "h_vanishes": bool(h_ok),
                "grad_matches": bool(g_ok),
            }
        )
        passed = passed and h_ok and g_ok
    return BoundaryReport(entries=entries, passed=passed)


@dataclass
class HClassReport:
    """Growth-fit evidence for the asymptotic metric class conditions."""

    passed: bool
    epsilon: float
    delta_bar: float
    levels: list
    conditions: dict
    qualifier: str = "numerical evidence, not proof"

    def to_dict(self):
        return {
            "passed": self.passed,
            "epsilon": self.epsilon,
            "delta_bar": self.delta_bar,
            "levels": self.levels,
            "conditions": self.conditions,
            "qualifier": self.qualifier,
        }


def _near_boundary_points(P, delta_bar, count=12):
    pts = []
    for slc in P.facet_atlas():
        nu = np.array([float(c) for c in P.halfspaces[slc.parent_index].normal])
        unit = nu / np.linalg.norm(nu)
        y = np.array([float(c) for c in slc.point])
        for s in (delta_bar / 8, delta_bar / 4, delta_bar / 2):
            cand = y + s * unit
            if P.contains([fr(float(c)) for c in cand], strict=True):
                pts.append(cand)
    return pts


def h_class_check(
    u: SymplecticPotential,
    v: Weight,
    P: Polyhedron,
    epsilon,
    delta_bar=0.5,
    sample_budget=600,
    levels=(10, 20, 40),
    growth_tol=0.05,
    seed=0,
) -> HClassReport:
    """Sampled verdicts for the four asymptotic conditions on H = Hess(u)^{-1}.

    Conditions: (1) sup v^eps |H|^2, (2) sup v^eps |dH|^2, (3) weighted sup
    norms of u itself on P and on the inner polyhedron, (4) a uniform bound
    on second derivatives of H in the boundary strip.  Sups are estimated on
    nested truncations; a clearly positive growth-fit slope across levels
    reads as an infinite supremum.
    """
    epsilon = float(epsilon)
    per = max(40, int(sample_budget) // max(len(levels), 1))
    inner = P.interior_polyhedron(fr(delta_bar))
    strip_extra = _near_boundary_points(P, float(delta_bar))
    sups = {k: [] for k in ("h_norm", "dh_norm", "u_c0", "u_c2", "strip_d2h")}
    for level in levels:
        pts = _sample_points(P, fr(level), per, seed=seed)
        strip_pts = list(strip_extra)
        s1 = s2 = s30 = s32 = s4 = 0.0
        for x in pts:
            if not P.contains([fr(float(c)) for c in x], strict=True):
                continue
            hd = HessianData(u, x)
            ve = v.value(x) ** epsilon
            s1 = max(s1, ve * float((hd.H**2).sum()))
            s2 = max(s2, ve * float((hd.dH**2).sum()))
            uval = abs(u.value(x))
            s30 = max(s30, ve * uval)
            if inner.contains([fr(float(c)) for c in x]):
                c2 = uval + float(np.linalg.norm(u.grad(x))) + float(
                    np.sqrt((hd.G**2).sum())
                )
                s32 = max(s32, ve * c2)
            else:
                strip_pts.append(np.asarray(x, dtype=float))
        for x in strip_pts:
            hd = HessianData(u, x)
            s4 = max(s4, float(np.abs(hd.d2H).max()))
        sups["h_norm"].append(s1)
        sups["dh_norm"].append(s2)
        sups["u_c0"].append(s30)
        sups["u_c2"].append(s32)
        sups["strip_d2h"].append(s4)

    conditions = {}
    order = [
        ("h_norm", 1),
        ("dh_norm", 2),
        ("u_c0", 3),
        ("u_c2", 3),
        ("strip_d2h", 4),
    ]
    logs = np.log([float(x) for x in levels])
    for key, idx in order:
        vals = sups[key]
        if max(vals) <= 1e-12:
            slope_fit = slope_last = 0.0
            finite = True
        else:
            lv = np.log(np.maximum(vals, 1e-300))
            slope_fit = _fit_slope(logs, lv)
            # the sup climbs until its argmax enters the truncation, so the
            # verdict reads the final level pair, not the transient
            slope_last = (lv[-1] - lv[-2]) / (logs[-1] - logs[-2])
            finite = slope_last <= growth_tol
        conditions[key] = {
            "condition": idx,
            "sups": [float(s) for s in vals],
            "slope": float(slope_last),
            "slope_fit": float(slope_fit),
            "finite": bool(finite),
        }
    passed = all(c["finite"] for c in conditions.values())
    return HClassReport(
        passed=passed,
        epsilon=epsilon,
        delta_bar=float(delta_bar),
        levels=[float(x) for x in levels],
        conditions=conditions,
    )


# -- energy ------------------------------------------------------------------


def _smooth_affine(u: SymplecticPotential):
    """Coefficients of an affine smooth part, or None if higher order."""
    if u.smooth_part is None:
        return [Fraction(0)] * u.nvars, Fraction(0)
    b = []
    for i in range(u.nvars):
        d = u._smooth_deriv((i,))
        if d is None or d.is_zero():
            b.append(Fraction(0))
            continue
        if not isinstance(d, ex.Const):
            return None
        b.append(fr(d.value))
    zero = np.zeros(u.nvars)
    c = u.smooth_part.eval(zero)
    return b, fr(float(c))


def potential_growth_bound(u: SymplecticPotential):
    """(C, 2) with |u(x)| <= C (1 + |x|)^2 on the domain closure.

    Uses |L log L| <= 1/e + L^2 per log term; requires an affine smooth part.
    """
    C = Fraction(0)
    for L, c in u.log_terms:
        size = sum(abs(x) for x in L.b) + abs(L.c)
        C += abs(c) * (size**2 + 1)
    aff = _smooth_affine(u)
    if aff is None:
        raise ValueError(
            "no automatic growth bound for a non-affine smooth part"
        )
    b, c0 = aff
    C += sum(abs(x) for x in b) + abs(c0)
    return (C, 2)


def _slice_adjusted_bound(bound, slc):
    """Transport an ambient (C, d) envelope bound into chart coordinates."""
    c, d = bound
    p = np.array([float(x) for x in slc.point])
    if not slc.basis:
        return (c, d)
    B = np.array([[float(x) for x in b] for b in slc.basis])
    scale = 1.0 + float(np.linalg.norm(p)) + float(np.sqrt((B**2).sum()))
    return (fr(float(c) * scale ** int(d) * (1 + 1e-9)), d)


def _hessians_match(u, u0):
    if u.log_terms != u0.log_terms:
        return False
    return _smooth_affine(u) is not None and _smooth_affine(u0) is not None


def mabuchi_energy(
    P: Polyhedron,
    v: Weight,
    w: Weight,
    u: SymplecticPotential,
    u0: SymplecticPotential,
    rel_tol=1e-8,
    abs_tol=1e-9,
    factor_bound=None,
    entropy_factor_bound=None,
    workers=1,
) -> float:
    """Energy  2 int_dP u v dsigma - int_P u w dx - int_P log det(H0 G) v dx.

    The relative-entropy term vanishes identically when u and u0 share
    Hessians (equal log terms, affine smooth parts), which covers the
    background-potential normalization; there the value reduces to the
    linear functional of u.
    """
    from .quadrature import integrate_interior, integrate_slice

    if factor_bound is None and not P.is_bounded():
        factor_bound = potential_growth_bound(u)

    def uval(pts):
        return u.value_array(pts)

    boundary = 0.0
    boundary_err = 0.0
    atlas = P.facet_atlas()
    per_facet = abs_tol / (3 * max(len(atlas), 1))
    for slc in atlas:
        fb = None if factor_bound is None else _slice_adjusted_bound(factor_bound, slc)
        res = integrate_slice(
            slc,
            v,
            rel_tol=rel_tol,
            abs_tol=per_facet,
            factor=uval,
            factor_bound=fb,
            workers=workers,
        )
        boundary += res.value
        boundary_err += res.total_error()

    interior = integrate_interior(
        P,
        w,
        rel_tol=rel_tol,
        abs_tol=abs_tol / 3,
        factor=uval,
        factor_bound=factor_bound,
        workers=workers,
    )

    entropy = 0.0
    if not _hessians_match(u, u0):
        def ent(pts):
            pts = np.asarray(pts, dtype=float).reshape(-1, u.nvars)
            out = np.empty(pts.shape[0])
            for k, x in enumerate(pts):
                s0, l0 = np.linalg.slogdet(u0.hess(x))
                s1, l1 = np.linalg.slogdet(u.hess(x))
                if s0 <= 0 or s1 <= 0:
                    raise NotConvexHere(
                        "Hessian not positive inside the energy integrand"
                    )
                out[k] = l1 - l0
            return out

        if entropy_factor_bound is None and not P.is_bounded():
            raise ValueError(
                "entropy term needs an explicit factor bound on unbounded domains"
            )
        entropy = integrate_interior(
            P,
            v,
            rel_tol=rel_tol,
            abs_tol=abs_tol / 3,
            factor=ent,
            factor_bound=entropy_factor_bound,
            workers=workers,
        ).value

    return 2.0 * boundary - interior.value - entropy
