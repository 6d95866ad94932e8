"""Batch front end: JSON problem files in, verdict JSON and CSV tables out.

A problem file names a polyhedron, a weight pair (literal or built by a
constructor directive), a task, and tolerances.  Each run writes one
directory containing a manifest, a verdict.json, and CSV tables that are
bit-identical across repeat runs with the same settings.  Exit codes:
0 for any computed verdict (a destabilizer is a successful computation),
2 for input errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

from . import calabi, pl
from .errors import (
    EmptyFamily,
    EmptyInterior,
    NonPrimitiveNormal,
    NotAdmissible,
    NotInteriorDirection,
    NotSimple,
    RegressionMismatch,
    SchemaError,
    WkstabError,
)
from .geometry import HalfSpace, Polyhedron, box, half_line, orthant_shifted
from .polynomials import Polynomial
from .potentials import (
    SymplecticPotential,
    abreu_scal_v,
    guillemin_potential,
    h_class_check,
    mabuchi_energy,
    soliton_residual,
)
from .quadrature import integrate_boundary, integrate_interior
from .rational import fr, fr_str
from .stability import (
    find_c_lambda,
    futaki,
    futaki_affine,
    futaki_v_vector,
    normalize_w_scale,
    semistability_scan,
    soliton_futaki_identity_check,
)
from .weights import (
    Weight,
    WeightTerm,
    check_class_W,
    krs_fibration_weight,
    soliton_weight_w,
)

TASKS = (
    "validate",
    "futaki",
    "scan",
    "profile",
    "li",
    "mabuchi",
    "abreu-check",
    "class-check",
)

CASES = ("flat_1d", "flat_c2_soliton", "c2_nonexistence", "li_profile_k1")

# errors in the problem statement itself; everything else WkstabError is a
# numerical failure of an otherwise well-posed run
INPUT_ERRORS = (
    SchemaError,
    EmptyInterior,
    NotSimple,
    NonPrimitiveNormal,
    NotInteriorDirection,
    NotAdmissible,
    EmptyFamily,
)


def _need(data, key, where):
    if not isinstance(data, dict) or key not in data:
        raise SchemaError(f"{where} needs a '{key}' entry")
    return data[key]


def _as_fr(x, where):
    try:
        return fr(x)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise SchemaError(f"{where}: not a rational number: {x!r}") from exc


# -- problem parsing -----------------------------------------------------------


def parse_polyhedron(data) -> Polyhedron:
    if not isinstance(data, dict):
        raise SchemaError("polyhedron must be an object")
    if "preset" in data:
        kind = data["preset"]
        if kind == "half_line":
            return half_line(_as_fr(data.get("a", -1), "half_line a"))
        if kind == "orthant":
            n = int(_need(data, "n", "orthant preset"))
            return orthant_shifted(n, _as_fr(data.get("offset", 1), "orthant offset"))
        if kind == "box":
            return box([
                (_as_fr(lo, "box bound"), _as_fr(hi, "box bound"))
                for lo, hi in _need(data, "bounds", "box preset")
            ])
        raise SchemaError(f"unknown polyhedron preset {kind!r}")
    hs = _need(data, "halfspaces", "polyhedron")
    dim = int(_need(data, "dim", "polyhedron"))
    try:
        out = Polyhedron(dim, [HalfSpace.from_json(h) for h in hs])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed polyhedron: {exc}") from exc
    return out


def _parse_one_weight(data, nvars, v: Weight | None = None) -> Weight:
    if not isinstance(data, dict):
        raise SchemaError("weight must be an object")
    if "terms" in data:
        return Weight.from_json(data, nvars=nvars)
    kind = _need(data, "constructor", "weight")
    if kind == "exponential":
        decay = [_as_fr(c, "decay") for c in _need(data, "decay", "exponential weight")]
        if len(decay) != nvars:
            raise SchemaError("decay vector length does not match the polyhedron")
        return Weight.exponential(decay, _as_fr(data.get("coeff", 1), "coeff"))
    if kind == "constant":
        return Weight.constant(nvars, _as_fr(_need(data, "value", "constant weight"), "value"))
    if kind == "polynomial":
        coeffs = _need(data, "coeffs", "polynomial weight")
        try:
            poly = Polynomial(nvars, {tuple(e): fr(c) for e, c in coeffs})
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"malformed polynomial weight: {exc}") from exc
        decay = [_as_fr(c, "decay") for c in data.get("decay", [0] * nvars)]
        return Weight.from_polynomial(poly, decay=decay)
    if kind == "soliton":
        if v is None:
            raise SchemaError("soliton weight needs v parsed first")
        n = data.get("n")
        return soliton_weight_w(v, None if n is None else int(n))
    raise SchemaError(f"unknown weight constructor {kind!r}")


def _parse_fib_data(rows, scalar_ok=True):
    out = []
    for row in rows:
        try:
            p_a, c_a, n_a, s_a = row
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"fibration row must be [p, c, n, s]: {row!r}") from exc
        if isinstance(p_a, (list, tuple)):
            pvec = [_as_fr(c, "fibration p") for c in p_a]
        elif scalar_ok:
            pvec = [_as_fr(p_a, "fibration p")]
        else:
            raise SchemaError("fibration p must be a vector")
        out.append((pvec, _as_fr(c_a, "fibration c"), int(n_a), _as_fr(s_a, "fibration s")))
    return out


def parse_weights(data, P: Polyhedron):
    if not isinstance(data, dict):
        raise SchemaError("weights must be an object")
    kind = data.get("constructor")
    if kind == "krs":
        rows = _parse_fib_data(_need(data, "data", "krs weights"), scalar_ok=False)
        b_w = [_as_fr(c, "krs b_w") for c in _need(data, "b_w", "krs weights")]
        v = krs_fibration_weight(rows, b_w, nvars=P.dim, polyhedron=P)
        return v, soliton_weight_w(v)
    if kind in ("fibration", "line_bundle"):
        v = _parse_one_weight(_need(data, "v", "weights"), P.dim)
        w = _parse_one_weight(_need(data, "w", "weights"), P.dim, v=v)
        rows = _parse_fib_data(_need(data, "data", f"{kind} weights"))
        if kind == "line_bundle":
            if P.dim != 1:
                raise SchemaError("line_bundle weights live on the half-line")
            return calabi.line_bundle_weights(v, w, [
                (r[0][0], r[1], r[2], r[3]) for r in rows
            ])
        from .weights import fibration_transform

        return fibration_transform(v, w, rows, polyhedron=P)
    if kind is not None:
        raise SchemaError(f"unknown weights constructor {kind!r}")
    v = _parse_one_weight(_need(data, "v", "weights"), P.dim)
    w = _parse_one_weight(_need(data, "w", "weights"), P.dim, v=v)
    return v, w


class Problem:
    """Parsed problem file: domain, weight pair, task, and tolerances."""

    def __init__(self, polyhedron, v, w, task, params, rel_tol, abs_tol):
        self.polyhedron = polyhedron
        self.v = v
        self.w = w
        self.task = task
        self.params = params
        self.rel_tol = rel_tol
        self.abs_tol = abs_tol

    def to_json(self):
        return {
            "polyhedron": self.polyhedron.to_json(),
            "weights": {"v": self.v.to_json(), "w": self.w.to_json()},
            "task": self.task,
            "params": self.params,
            "tolerances": {"rel_tol": self.rel_tol, "abs_tol": self.abs_tol},
        }


def parse_problem(data) -> Problem:
    if not isinstance(data, dict):
        raise SchemaError("problem file must be a JSON object")
    P = parse_polyhedron(_need(data, "polyhedron", "problem"))
    task = _need(data, "task", "problem")
    if task not in TASKS:
        raise SchemaError(f"unknown task {task!r}; expected one of {TASKS}")
    weights = data.get("weights")
    if weights is None:
        raise SchemaError("problem needs a 'weights' entry")
    v, w = parse_weights(weights, P)
    tol = data.get("tolerances", {})
    if not isinstance(tol, dict):
        raise SchemaError("tolerances must be an object")
    params = data.get("params", {})
    if not isinstance(params, dict):
        raise SchemaError("params must be an object")
    return Problem(
        P,
        v,
        w,
        task,
        params,
        float(tol.get("rel_tol", 1e-8)),
        float(tol.get("abs_tol", 1e-9)),
    )


def load_problem(path) -> Problem:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read problem file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"problem file is not valid JSON: {exc}") from exc
    return parse_problem(data)


# -- deterministic artifacts ----------------------------------------------------


def _render(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Fraction):
        return fr_str(value)
    return str(value)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return fr_str(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


class RunDir:
    """Output directory; records every artifact for the manifest."""

    def __init__(self, path):
        self.path = path
        self.artifacts = []
        os.makedirs(path, exist_ok=True)

    def write_json(self, name, obj):
        text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
        with open(os.path.join(self.path, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        if name not in self.artifacts:
            self.artifacts.append(name)

    def write_csv(self, name, header, rows):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_render(c) for c in row])
        with open(os.path.join(self.path, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(buf.getvalue())
        if name not in self.artifacts:
            self.artifacts.append(name)


# -- task handlers ---------------------------------------------------------------


def _task_validate(problem: Problem, out: RunDir, workers):
    P = problem.polyhedron
    reparsed = parse_problem(problem.to_json())
    round_trip = (
        reparsed.polyhedron == P
        and reparsed.v == problem.v
        and reparsed.w == problem.w
    )
    if not round_trip:
        raise SchemaError("serialize/parse round trip failed to reproduce the problem")
    return {
        "kind": "Valid",
        "dim": P.dim,
        "facets": len(P.halfspaces),
        "bounded": P.is_bounded(),
        "delzant": P.is_delzant(),
        "v_decay": [[fr_str(l) for l in t.decay] for t in problem.v.terms],
        "w_decay": [[fr_str(l) for l in t.decay] for t in problem.w.terms],
        "round_trip": round_trip,
    }


def _futaki_family(problem: Problem):
    params = problem.params
    P = problem.polyhedron
    if "pieces" in params:
        f = pl.PiecewiseLinearConvex.from_json(params, polyhedron=P)
        return [("explicit", f)]
    family = params.get("family", "f_x0" if P.dim == 1 else "f_R")
    grid = params.get("grid")
    if grid is None:
        raise SchemaError("futaki task needs a 'grid' of family parameters")
    out = []
    if family == "f_x0":
        if P.dim != 1:
            raise SchemaError("f_x0 is a half-line family")
        for x0 in grid:
            out.append((x0, pl.f_x0(_as_fr(x0, "x0"))))
    elif family == "f_R":
        direction = [_as_fr(c, "direction") for c in _need(params, "direction", "f_R family")]
        for R in grid:
            out.append((R, pl.f_R(direction, _as_fr(R, "R"))))
    elif family == "simple_crease":
        b = [_as_fr(c, "crease slope") for c in _need(params, "b", "crease family")]
        for a in grid:
            out.append((a, pl.simple_crease(b, _as_fr(a, "offset"))))
    else:
        raise SchemaError(f"unknown PL family {family!r}")
    return out


def _task_futaki(problem: Problem, out: RunDir, workers):
    P, v, w = problem.polyhedron, problem.v, problem.w
    method = problem.params.get("method", "auto")
    rows = []
    for label, f in _futaki_family(problem):
        res = futaki(
            P, v, w, f,
            rel_tol=problem.rel_tol,
            abs_tol=problem.abs_tol,
            method=method,
            workers=workers,
        )
        rows.append((label, res.value, res.total_error()))
    out.write_csv("futaki.csv", ["param", "futaki", "error"], rows)
    verdict = {
        "kind": "Computed",
        "rows": [
            {"param": label, "value": val, "error": err} for label, val, err in rows
        ],
    }
    if problem.params.get("affine", True):
        aff = futaki_affine(
            P, v, w,
            rel_tol=problem.rel_tol,
            abs_tol=problem.abs_tol,
            method=method,
            workers=workers,
        )
        verdict["affine"] = [
            {"value": r.value, "error": r.total_error()} for r in aff
        ]
    return verdict


def _task_scan(problem: Problem, out: RunDir, workers):
    params = problem.params
    verdict = semistability_scan(
        problem.polyhedron,
        problem.v,
        problem.w,
        families=tuple(params.get("families", ("f_R", "simple_crease"))),
        budget=int(params.get("budget", 64)),
        rel_tol=problem.rel_tol,
        abs_tol=problem.abs_tol,
        tol=float(params.get("tol", 0.0)),
        affine_tol=float(params.get("affine_tol", 1e-8)),
        workers=workers,
    )
    out.write_csv(
        "scan.csv",
        ["family", "params", "futaki", "error"],
        [
            (e["family"], json.dumps(_jsonable(e["params"]), sort_keys=True), e["value"], e["error"])
            for e in verdict.search_log
        ],
    )
    return {"task_kind": "scan", **verdict.to_dict()}


def _profile_grid(params, scan_max):
    lo = float(params.get("table_lo", -1.0))
    hi = float(params.get("table_hi", min(scan_max, 10.0)))
    n = int(params.get("table_points", 201))
    return np.linspace(lo, hi, n)


def _task_profile(problem: Problem, out: RunDir, workers):
    if problem.polyhedron.dim != 1:
        raise SchemaError("profile task lives on the half-line")
    params = problem.params
    scan_max = float(params.get("scan_max", 50.0))
    if params.get("decaying", False):
        sol = calabi.profile_solve_decaying(problem.v, problem.w, scan_max=scan_max)
        verdict_obj = calabi.ExistenceVerdict(
            "Exists" if sol.positivity.positive else "FailsPositivityAt",
            sol.positivity.first_nonpositive,
            sol.positivity.certified,
            sol,
        )
    else:
        verdict_obj = calabi.existence_verdict(problem.v, problem.w, scan_max=scan_max)
        sol = verdict_obj.solution
    xs = _profile_grid(params, scan_max)
    vt = sol.vtheta_values(xs)
    theta = sol.theta_values(xs)
    out.write_csv(
        "profile.csv",
        ["x", "vtheta", "theta"],
        list(zip(xs.tolist(), vt.tolist(), theta.tolist())),
    )
    verdict = verdict_obj.to_dict()
    verdict["task_kind"] = "profile"
    x0_grid = params.get("x0_grid")
    if x0_grid:
        rep = calabi.crease_profile_identity(
            problem.v,
            problem.w,
            x0_grid=tuple(x0_grid),
            rel_tol=problem.rel_tol,
            workers=workers,
            solution=sol,
        )
        out.write_csv(
            "crease_identity.csv",
            ["x0", "futaki", "error", "vtheta"],
            rep.rows,
        )
        verdict["crease_identity"] = rep.to_dict()
    return verdict


def _task_li(problem: Problem, out: RunDir, workers):
    params = problem.params
    for key in ("d", "k", "tau", "kappa"):
        if key not in params:
            raise SchemaError(f"li task needs parameter {key!r}")
    prof = calabi.li_profile(
        int(params["d"]),
        int(params["k"]),
        _as_fr(params["tau"], "tau"),
        _as_fr(params["kappa"], "kappa"),
        _as_fr(params.get("mu", 1), "mu"),
    )
    phi0 = float(params.get("phi0", 1.0))
    c0rep = calabi.li_C0(prof, phi0)
    verdict = {
        "kind": "Computed",
        "task_kind": "li",
        "profile": prof.to_dict(),
        "F_at_1": fr_str(prof.F_fraction(1)),
        "C0": c0rep.to_dict(),
    }
    if prof.k == 1 and prof.p > Fraction(1, 2):
        fit = params.get("fit_range", (1e2, 1e6))
        dec = calabi.li_decay_check(
            prof,
            phi0=phi0,
            s0=float(params.get("s0", 1.0)),
            fit_range=(float(fit[0]), float(fit[1])),
            npts=int(params.get("npts", 13)),
        )
        out.write_csv(
            "decay.csv",
            ["s", "phi", "fixed_point_residual", "cone_deviation"],
            dec.rows,
        )
        verdict["decay"] = dec.to_dict()
    us = np.geomspace(max(phi0, 1e-2), 1e4, 41)
    out.write_csv(
        "li_profile.csv",
        ["phi", "F", "F_over_phi"],
        [(u, prof.F_value(u), prof.F_value(u) / u) for u in us.tolist()],
    )
    return verdict


def _interior_samples(P: Polyhedron, count, seed=0, delta_star=Fraction(1, 2), margin=0.05):
    """Deterministic strictly-interior sample; log potentials stay finite."""
    Q = P.truncate(delta_star=delta_star)
    verts = Q.vertices()
    lo = np.array([min(float(v[i]) for v in verts) for i in range(P.dim)])
    hi = np.array([max(float(v[i]) for v in verts) for i in range(P.dim)])
    rng = np.random.default_rng(seed)
    pts = [np.array([float(c) for c in P.interior_point()])]
    tries = 0
    while len(pts) < count and tries < 1000 * count:
        x = rng.uniform(lo, hi)
        tries += 1
        if all(float(hs.value(x)) >= margin for hs in P.halfspaces):
            pts.append(x)
    return np.array(pts)


def _parse_potential(spec, P: Polyhedron):
    if spec in (None, "guillemin"):
        return guillemin_potential(P)
    if isinstance(spec, dict):
        return SymplecticPotential.from_json(spec, domain=P)
    raise SchemaError(f"unknown potential spec {spec!r}")


def _task_mabuchi(problem: Problem, out: RunDir, workers):
    P = problem.polyhedron
    u = _parse_potential(problem.params.get("u"), P)
    u0 = _parse_potential(problem.params.get("u0"), P)
    value = mabuchi_energy(
        P,
        problem.v,
        problem.w,
        u,
        u0,
        rel_tol=problem.rel_tol,
        abs_tol=problem.abs_tol,
        workers=workers,
    )
    return {"kind": "Computed", "task_kind": "mabuchi", "energy": value}


def _task_abreu(problem: Problem, out: RunDir, workers):
    P, v, w = problem.polyhedron, problem.v, problem.w
    params = problem.params
    u = _parse_potential(params.get("u"), P)
    pts = _interior_samples(
        P,
        int(params.get("count", 25)),
        seed=int(params.get("seed", 0)),
        delta_star=_as_fr(params.get("delta_star", Fraction(1, 2)), "delta_star"),
    )
    rows = []
    worst = 0.0
    for x in pts:
        scal = abreu_scal_v(u, v, x)
        want = w.value([fr(float(c)) for c in x])
        resid = abs(scal - want) / max(1.0, abs(want))
        worst = max(worst, resid)
        rows.append((*[float(c) for c in x], scal, want, resid))
    coord_names = [f"x{i + 1}" for i in range(P.dim)]
    out.write_csv(
        "abreu.csv", coord_names + ["scal_v", "w", "relative_residual"], rows
    )
    return {
        "kind": "Computed",
        "task_kind": "abreu-check",
        "points": len(rows),
        "max_relative_residual": worst,
    }


def _task_class(problem: Problem, out: RunDir, workers):
    params = problem.params
    rep = check_class_W(
        problem.v,
        problem.w,
        problem.polyhedron,
        float(params.get("beta_star", 1.0)),
        k_max=int(params.get("k_max", 2)),
    )
    verdict = {
        "kind": "Computed",
        "task_kind": "class-check",
        "class_W": rep.to_dict(),
    }
    eps_list = params.get("epsilon")
    if eps_list:
        u = _parse_potential(params.get("u"), problem.polyhedron)
        verdict["h_class"] = {}
        for eps in eps_list:
            hrep = h_class_check(u, problem.v, problem.polyhedron, float(eps))
            verdict["h_class"][repr(float(eps))] = hrep.to_dict()
    return verdict


HANDLERS = {
    "validate": _task_validate,
    "futaki": _task_futaki,
    "scan": _task_scan,
    "profile": _task_profile,
    "li": _task_li,
    "mabuchi": _task_mabuchi,
    "abreu-check": _task_abreu,
    "class-check": _task_class,
}


def run(problem: Problem, out_dir, rel_tol=None, threads=1, input_digest=None):
    """Execute one problem file; returns the verdict written to verdict.json."""
    if rel_tol is not None:
        problem.rel_tol = float(rel_tol)
    out = RunDir(out_dir)
    verdict = HANDLERS[problem.task](problem, out, max(1, int(threads)))
    out.write_json("verdict.json", verdict)
    out.write_json(
        "manifest.json",
        {
            "tool": "wkstab",
            "format": 1,
            "task": problem.task,
            "input_sha256": input_digest,
            "settings": {"rel_tol": problem.rel_tol, "abs_tol": problem.abs_tol},
            "artifacts": sorted(out.artifacts) + ["manifest.json"],
            "status": "computed",
        },
    )
    return verdict


# -- stored regression expectations ---------------------------------------------

EXPECTED = {
    "flat_1d": {
        "futaki_affine_exact_F1": (0.0, 1e-10),
        "futaki_affine_exact_Fx": (0.0, 1e-10),
        "futaki_affine_adaptive_F1": (0.0, 1e-6),
        "futaki_affine_adaptive_Fx": (0.0, 1e-6),
        "profile_symbolic_flat": (1.0, 0.0),
        "theta_at_0": (2.0, 1e-12),
        "theta_at_1": (4.0, 1e-12),
        "theta_at_2": (6.0, 1e-12),
        "futaki_f_x0_0": (2.0, 1e-10),
        "futaki_f_x0_1": (4.0 * math.exp(-1.0), 1e-10),
        "futaki_f_x0_2": (6.0 * math.exp(-2.0), 1e-10),
        "crease_profile_residual": (0.0, 1e-10),
    },
    "flat_c2_soliton": {
        "abreu_max_relative_residual": (0.0, 1e-6),
        "soliton_residual_deviation": (0.0, 1e-10),
        "soliton_fit_constant": (2.0 * math.log(2.0), 1e-8),
        "futaki_v_x1": (0.0, 1e-8),
        "futaki_v_x2": (0.0, 1e-8),
        "soliton_identity_holds": (1.0, 0.0),
    },
    "c2_nonexistence": {
        "block_integral": (0.0, 0.0),
        "boundary_mass": (4.0 * math.e**2, 1e-8),
        "c_lambda": (2.238731026649475, 1e-6),
        "w_scale": (65.6338527896735, 1e-4),
        "futaki_affine_F1": (0.0, 1e-8),
        "futaki_affine_Fx1": (0.0, 1e-6),
        "futaki_affine_Fx2": (0.0, 1e-6),
        "destabilizer_found": (1.0, 0.0),
        "destabilizer_R": (40.0, 1e-6),
        "destabilizer_certified_negative": (1.0, 0.0),
    },
    "li_profile_k1": {
        "F_at_1": (5.5, 0.0),
        "p": (2.0, 0.0),
        "C0": (-0.48022039401802374, 1e-9),
        "D0": (1.0776204097172768, 1e-9),
        "decay_slope": (-2.0000004637856947, 1e-5),
        "decay_monotone": (1.0, 0.0),
        "max_fixed_point_residual": (0.0, 1e-12),
    },
}


def _case_flat_1d(workers):
    P = half_line(-1)
    v = Weight.exponential([1])
    w = soliton_weight_w(v, 1)
    got = {}
    aff_exact = futaki_affine(P, v, w, method="exact", workers=workers)
    got["futaki_affine_exact_F1"] = aff_exact[0].value
    got["futaki_affine_exact_Fx"] = aff_exact[1].value
    aff_ad = futaki_affine(P, v, w, method="adaptive", workers=workers)
    got["futaki_affine_adaptive_F1"] = aff_ad[0].value
    got["futaki_affine_adaptive_Fx"] = aff_ad[1].value
    sol = calabi.profile_solve(v, w)
    flat = calabi.PolyExp({1: [2, 2]})
    got["profile_symbolic_flat"] = float(sol.vtheta is not None and sol.vtheta == flat)
    for x0 in (0, 1, 2):
        got[f"theta_at_{x0}"] = sol.theta(float(x0))
    rep = calabi.crease_profile_identity(v, w, x0_grid=(0, 1, 2), workers=workers, solution=sol)
    for (x0, fv, _err, _rhs) in rep.rows:
        got[f"futaki_f_x0_{int(x0)}"] = fv
    got["crease_profile_residual"] = rep.max_residual
    return got


def _case_flat_c2(workers):
    P = orthant_shifted(2, 1)
    v = Weight.exponential([1, 1])
    w = soliton_weight_w(v, 2)
    u = guillemin_potential(P)
    got = {}
    pts = _interior_samples(P, 20, seed=3)
    worst = 0.0
    for x in pts:
        scal = abreu_scal_v(u, v, x)
        want = w.value_array(np.asarray(x, dtype=float).reshape(1, -1))[0]
        worst = max(worst, abs(scal - want) / max(1.0, abs(want)))
    got["abreu_max_relative_residual"] = worst
    dev, (alpha, _beta) = soliton_residual(u, v, pts)
    got["soliton_residual_deviation"] = dev
    got["soliton_fit_constant"] = alpha
    vec = futaki_v_vector(P, v, workers=workers)
    got["futaki_v_x1"] = vec[0].value
    got["futaki_v_x2"] = vec[1].value
    idrep = soliton_futaki_identity_check(P, v, workers=workers)
    got["soliton_identity_holds"] = float(idrep.holds)
    return got


def _case_c2_nonexistence(workers):
    got = {}
    P1 = half_line(-1)
    x = Polynomial.variable(0, 1)
    blk = Weight(
        1,
        [WeightTerm(
            (x**2 + Polynomial.constant(1, 1)) * (x - Polynomial.constant(1, 1)),
            (),
            (Fraction(1),),
        )],
    )
    got["block_integral"] = integrate_interior(P1, blk, method="exact").value
    P = orthant_shifted(2, 1)
    x1 = Polynomial.variable(0, 2)
    x2 = Polynomial.variable(1, 2)
    q1 = x1**2 * x2**2 + Polynomial.constant(2, 1)
    v = Weight(2, [WeightTerm(q1, (), (Fraction(1), Fraction(1)))])
    got["boundary_mass"] = integrate_boundary(
        P, v, rel_tol=1e-12, abs_tol=1e-14, workers=workers
    ).value
    lam = Fraction(1, 2)
    c = find_c_lambda(0.5, workers=workers)
    got["c_lambda"] = c
    cq = Fraction(c)
    b1 = x1**4 + Polynomial.constant(2, cq)
    b2 = x2**4 + Polynomial.constant(2, cq)
    q2 = Weight(
        2, [WeightTerm(Polynomial.constant(2, 1), ((b1, -1), (b2, -1)), (lam, lam))]
    )
    a = normalize_w_scale(P, v, q2, rel_tol=1e-10, abs_tol=1e-12, workers=workers)
    got["w_scale"] = a
    w = q2 * Fraction(a)
    aff = futaki_affine(P, v, w, rel_tol=1e-8, abs_tol=2e-7, workers=workers)
    got["futaki_affine_F1"] = aff[0].value
    got["futaki_affine_Fx1"] = aff[1].value
    got["futaki_affine_Fx2"] = aff[2].value
    verdict = semistability_scan(
        P, v, w, budget=40, rel_tol=1e-6, abs_tol=1e-8, workers=workers
    )
    got["destabilizer_found"] = float(verdict.kind == "Destabilizer")
    R = math.nan
    if verdict.f is not None:
        offsets = [p.c for p in verdict.f.pieces if any(c != 0 for c in p.b)]
        if offsets:
            R = -min(float(c) for c in offsets)
    got["destabilizer_R"] = R
    certified = (
        verdict.kind == "Destabilizer"
        and verdict.value is not None
        and verdict.value < 0
        and verdict.value + 2.0 * verdict.error < 0
    )
    got["destabilizer_certified_negative"] = float(certified)
    return got, verdict


def _case_li(workers):
    prof = calabi.li_profile(1, 1, 3, 1, 1)
    got = {
        "F_at_1": float(prof.F_fraction(1)),
        "p": float(prof.p),
    }
    c0rep = calabi.li_C0(prof, 1.0)
    got["C0"] = c0rep.c0
    dec = calabi.li_decay_check(prof, phi0=1.0, s0=1.0)
    got["D0"] = dec.D0
    got["decay_slope"] = dec.slope
    got["decay_monotone"] = float(dec.monotone)
    got["max_fixed_point_residual"] = dec.max_residual
    return got


def reproduce(case, out_dir=None, threads=1):
    """Re-run a stored benchmark case and diff against expected values."""
    if case not in CASES:
        raise SchemaError(f"unknown case {case!r}; expected one of {CASES}")
    workers = max(1, int(threads))
    if case == "flat_1d":
        got = _case_flat_1d(workers)
    elif case == "flat_c2_soliton":
        got = _case_flat_c2(workers)
    elif case == "c2_nonexistence":
        got, _verdict = _case_c2_nonexistence(workers)
    else:
        got = _case_li(workers)
    expected = EXPECTED[case]
    rows = []
    failures = []
    for name, (want, tol) in expected.items():
        have = got.get(name)
        if have is not None:
            have = float(have)
        ok = have is not None and math.isfinite(have) and abs(have - want) <= tol
        rows.append({"name": name, "got": have, "expected": want, "tol": tol, "ok": ok})
        if not ok:
            failures.append(name)
    report = {"case": case, "ok": not failures, "checks": rows}
    if out_dir is not None:
        out = RunDir(out_dir)
        out.write_json("reproduce.json", report)
        out.write_csv(
            "reproduce.csv",
            ["name", "got", "expected", "tol", "ok"],
            [(r["name"], r["got"], r["expected"], r["tol"], int(r["ok"])) for r in rows],
        )
    for r in rows:
        status = "ok  " if r["ok"] else "FAIL"
        print(f"{status} {case}.{r['name']}: got {r['got']!r} expected {r['expected']!r} (tol {r['tol']:g})")
    if failures:
        raise RegressionMismatch(
            f"case {case}: {len(failures)} check(s) off: {', '.join(failures)}",
            case=case,
            failures=failures,
            report=report,
        )
    return report


# -- entry point -----------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="wkstab",
        description="Weighted K-stability toolkit: problem files in, verdicts out.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="execute a JSON problem file")
    run_p.add_argument("--input", required=True, help="problem file (JSON)")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--rel-tol", type=float, default=None)
    run_p.add_argument("--threads", type=int, default=1)
    rep_p = sub.add_parser("reproduce", help="re-run a stored benchmark case")
    rep_p.add_argument("--case", required=True, choices=CASES)
    rep_p.add_argument("--out", default=None, help="optional report directory")
    rep_p.add_argument("--threads", type=int, default=1)
    return parser


def _emit_error(out_dir, exc, exit_code):
    payload = {
        "status": "error",
        "exit_code": exit_code,
        "error": type(exc).__name__,
        "code": getattr(exc, "code", "error"),
        "message": str(exc),
        "context": _jsonable(getattr(exc, "context", {})),
    }
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    if out_dir:
        try:
            RunDir(out_dir).write_json("error.json", payload)
        except OSError:
            pass


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    out_dir = getattr(args, "out", None)
    try:
        if args.command == "run":
            with open(args.input, "rb") as fh:
                digest = hashlib.sha256(fh.read()).hexdigest()
            problem = load_problem(args.input)
            verdict = run(
                problem,
                args.out,
                rel_tol=args.rel_tol,
                threads=args.threads,
                input_digest=digest,
            )
            print(json.dumps(_jsonable(verdict), sort_keys=True))
            return 0
        reproduce(args.case, out_dir=args.out, threads=args.threads)
        return 0
    except OSError as exc:
        _emit_error(out_dir, exc, 2)
        return 2
    except INPUT_ERRORS as exc:
        _emit_error(out_dir, exc, 2)
        return 2
    except WkstabError as exc:
        _emit_error(out_dir, exc, 3)
        return 3


if __name__ == "__main__":
    sys.exit(main())
