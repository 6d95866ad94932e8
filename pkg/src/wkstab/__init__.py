"""Weighted K-stability on unbounded toric manifolds.

Delzant polyhedra, weighted Futaki invariants, generalized Abreu operators,
and Calabi-ansatz existence certificates for (v, w)-cscK metrics.
"""

from .errors import WkstabError
from .geometry import Cone, HalfSpace, Polyhedron, box, half_line, orthant_shifted
from .pl import PiecewiseLinearConvex, f_R, f_x0, simple_crease
from .polynomials import Polynomial
from .potentials import (
    SymplecticPotential,
    abreu_scal_v,
    guillemin_potential,
    h_class_check,
    legendre,
    mabuchi_energy,
    soliton_residual,
)
from .quadrature import (
    exact_1d,
    integrate_boundary,
    integrate_crease,
    integrate_interior,
)
from .rational import ExactExp, fr
from .stability import (
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
from .weights import (
    Weight,
    check_class_W,
    fibration_transform,
    krs_fibration_weight,
    soliton_weight_w,
)
from .calabi import (
    LiProfile,
    PolyExp,
    ProfileSolution,
    crease_profile_identity,
    existence_verdict,
    li_C0,
    li_decay_check,
    li_profile,
    line_bundle_weights,
    profile_solve,
    profile_solve_decaying,
)

__version__ = "0.1.0"

__all__ = [
    "WkstabError",
    "Cone",
    "HalfSpace",
    "Polyhedron",
    "box",
    "half_line",
    "orthant_shifted",
    "PiecewiseLinearConvex",
    "f_R",
    "f_x0",
    "simple_crease",
    "Polynomial",
    "SymplecticPotential",
    "abreu_scal_v",
    "guillemin_potential",
    "h_class_check",
    "legendre",
    "mabuchi_energy",
    "soliton_residual",
    "exact_1d",
    "integrate_boundary",
    "integrate_crease",
    "integrate_interior",
    "ExactExp",
    "fr",
    "crease_identity_check",
    "find_c_lambda",
    "futaki",
    "futaki_affine",
    "futaki_v_vector",
    "normalize_w_scale",
    "semistability_scan",
    "soliton_futaki_identity_check",
    "uniform_lambda_estimate",
    "Weight",
    "check_class_W",
    "fibration_transform",
    "krs_fibration_weight",
    "soliton_weight_w",
    "LiProfile",
    "PolyExp",
    "ProfileSolution",
    "crease_profile_identity",
    "existence_verdict",
    "li_C0",
    "li_decay_check",
    "li_profile",
    "line_bundle_weights",
    "profile_solve",
    "profile_solve_decaying",
]
