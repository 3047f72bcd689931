"""Decoupled mixed finite element schemes for the clamped 3D bi-Laplacian."""
from .assembly import FormKind, assemble_bilinear, assemble_linear, field_at_points
from .elements import Family, get_family
from .infsup import InfSupReport, estimate_infsup, infsup_study
from .linalg import SolveReport, cg_solve, minres_solve, sym_eig_dense
from .mesh import Mesh, MeshError, build_box_mesh, cell_geometry
from .mms import MmsCase, exact_norms, mms_case, verify_case
from .quadrature import QuadRule, monomial_integral, tet_rule
from .scheme import (ErrorReport, SchemeConfig, SolutionBundle, SolverError, compare_schemes,
                     compute_errors, observed_rates, run_scheme)
from .spaces import FESpace, build_space, gradient_inclusion

__version__ = "0.1.0"

__all__ = [
    "FormKind", "assemble_bilinear", "assemble_linear", "field_at_points",
    "Family", "get_family",
    "InfSupReport", "estimate_infsup", "infsup_study",
    "SolveReport", "cg_solve", "minres_solve", "sym_eig_dense",
    "Mesh", "MeshError", "build_box_mesh", "cell_geometry",
    "MmsCase", "exact_norms", "mms_case", "verify_case",
    "QuadRule", "monomial_integral", "tet_rule",
    "ErrorReport", "SchemeConfig", "SolutionBundle", "SolverError", "compare_schemes",
    "compute_errors", "observed_rates", "run_scheme",
    "FESpace", "build_space", "gradient_inclusion",
]
