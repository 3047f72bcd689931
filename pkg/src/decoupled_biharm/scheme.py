"""Three-stage decoupled solver for the clamped bi-Laplacian.

Stage 1 solves a P1 Poisson problem for ``r``; stage 2 solves the saddle
point system for ``(phi, zeta[, p])``; stage 3 solves a Poisson problem for
``u`` with the gradient data ``phi``. No stage is ever coupled back to an
earlier one.

Scheme ``"A"`` keeps the multiplier ``p`` that fixes the gauge of ``zeta``;
scheme ``"B"`` drops it and solves the singular but consistent system. Only
gauge-invariant quantities (``r``, ``phi``, ``u``, ``curl zeta``) are
comparable across the two.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import FormKind, assemble_bilinear, assemble_linear, field_at_points
from .elements import Family
from .linalg import SolveReport, cg_solve, jacobi_preconditioner, minres_solve
from .mesh import Mesh, build_box_mesh, cell_geometry
from .mms import MmsCase, verify_case
from .quadrature import tet_rule
from .spaces import FESpace, build_space

__all__ = [
    "SchemeConfig",
    "SchemeSpaces",
    "SolutionBundle",
    "ErrorReport",
    "SolverError",
    "build_spaces",
    "run_stage1",
    "run_stage2",
    "run_stage3",
    "stage2_system",
    "run_scheme",
    "compute_errors",
    "observed_rates",
    "interpolate_nodal",
    "discrete_norm",
    "compare_schemes",
]

logger = logging.getLogger(__name__)

PHI_FAMILIES = {"p1": Family.EP1, "p2": Family.EP2}


class SolverError(RuntimeError):
    """An iterative solve failed to reach its tolerance."""

    def __init__(self, stage: str, report: SolveReport):
        super().__init__(
            f"{stage}: solver stopped after {report.iterations} iterations "
            f"at relative residual {report.residual:.3e}"
        )
        self.stage = stage
        self.report = report


@dataclass(frozen=True)
class SchemeConfig:
    """Discretisation and solver settings.

    ``k`` is the degree of ``r``, ``p`` and the Nedelec space (only 1 is
    implemented); ``m`` the Lagrange degree for ``u``. ``phi_family`` picks
    the bubble-enriched space for ``phi``: ``"p1"`` (default) or ``"p2"``.
    """

    scheme: str = "A"
    n: int = 4
    k: int = 1
    m: int = 2
    phi_family: str = "p1"
    tol: float = 1e-12
    maxit: int | None = None
    load_degree: int = 14
    norm_degree: int | None = None
    verify: bool = True

    def __post_init__(self):
        if self.scheme not in ("A", "B"):
            raise ValueError(f"scheme must be 'A' or 'B', got {self.scheme!r}")
        if self.k != 1:
            raise ValueError("only k = 1 is implemented")
        if self.m not in (1, 2) or self.m < self.k:
            raise ValueError(f"need m >= k with m in (1, 2), got m={self.m}")
        if self.phi_family not in PHI_FAMILIES:
            raise ValueError(f"phi_family must be one of {sorted(PHI_FAMILIES)}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True, eq=False)
class SchemeSpaces:
    mesh: Mesh
    scalar: FESpace     # L^1_h0: r and p
    phi: FESpace        # vector enriched space
    ned: FESpace        # lowest-order Nedelec with vanishing tangential trace
    u: FESpace          # L^m_h0

    def dofs(self, scheme: str) -> dict:
        return {
            "r": self.scalar.ndofs,
            "phi": self.phi.ndofs,
            "zeta": self.ned.ndofs,
            "p": self.scalar.ndofs if scheme == "A" else None,
            "u": self.u.ndofs,
        }


def build_spaces(mesh: Mesh, config: SchemeConfig) -> SchemeSpaces:
    return SchemeSpaces(
        mesh=mesh,
        scalar=build_space(mesh, Family.P1),
        phi=build_space(mesh, PHI_FAMILIES[config.phi_family], components=3),
        ned=build_space(mesh, Family.NED1),
        u=build_space(mesh, Family.P2 if config.m == 2 else Family.P1),
    )


@dataclass
class SolutionBundle:
    """Discrete quintet; ``p`` is None for scheme B."""

    spaces: SchemeSpaces
    scheme: str
    r: np.ndarray
    phi: np.ndarray
    zeta: np.ndarray
    p: np.ndarray | None
    u: np.ndarray
    reports: dict = field(default_factory=dict)


@dataclass
class ErrorReport:
    """Errors of a bundle against the exact fields; None where undefined."""

    err_r_l2: float
    err_r_h1: float
    err_phi_l2: float
    err_phi_h1: float
    err_zeta_l2: float | None
    err_zeta_hcurl: float
    err_p_h1: float | None
    err_u_h1: float
    h: float
    dofs: dict

    NORMS = ("err_r_l2", "err_r_h1", "err_phi_l2", "err_phi_h1", "err_zeta_l2",
             "err_zeta_hcurl", "err_p_h1", "err_u_h1")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.NORMS}


def _check(stage, report, x):
    if not report.converged:
        raise SolverError(stage, report)
    return x


def run_stage1(spaces: SchemeSpaces, case: MmsCase, config: SchemeConfig):
    """P1 Poisson problem ``(grad r, grad v) = -<f1, v>``."""
    V = spaces.scalar
    K = assemble_bilinear(FormKind.GRAD_GRAD, V, V)
    b = -assemble_linear(V, case.f1, tet_rule(config.load_degree))
    x, rep = cg_solve(K, b, tol=config.tol, maxit=config.maxit, preconditioner="jacobi")
    logger.info("stage 1: %d dofs, %d its, res %.2e", V.ndofs, rep.iterations, rep.residual)
    return _check("stage 1", rep, x), rep


def stage2_system(spaces: SchemeSpaces, case: MmsCase, r_h: np.ndarray, config: SchemeConfig):
    """Block matrix, right-hand side and diagonal preconditioner of stage 2.

    Unknowns are ordered (phi, zeta, p); scheme B omits p.
    """
    Vp, N, S = spaces.phi, spaces.ned, spaces.scalar
    alpha_deg = case.degrees.get("alpha", 1)
    phi_deg = 2 * (Vp.family.degree - 1)
    M = (assemble_bilinear(FormKind.DIV_DIV, Vp, Vp, alpha=case.alpha,
                           quad=tet_rule(max(phi_deg + alpha_deg, 1)))
         + assemble_bilinear(FormKind.CURL_CURL_VEC, Vp, Vp))
    C = assemble_bilinear(FormKind.CURL_CURL_MIXED, N, Vp)

    rule = tet_rule(config.load_degree)

    def rhs(pts, cells):
        return case.f2(pts) - field_at_points(S, r_h, rule, "grad", cells)

    load = assemble_linear(Vp, rhs, rule, cellwise=True)

    n_norm = (assemble_bilinear(FormKind.NED_MASS, N, N)
              + assemble_bilinear(FormKind.NED_CURL_CURL, N, N))
    if config.scheme == "A":
        Gp = assemble_bilinear(FormKind.NED_GRAD_SCALAR, S, N)
        A = sp.bmat([[M, C, None], [C.T, None, Gp], [None, Gp.T, None]], format="csr")
        b = np.concatenate([load, np.zeros(N.ndofs + S.ndofs)])
        K1 = assemble_bilinear(FormKind.GRAD_GRAD, S, S)
        diag = np.concatenate([M.diagonal(), n_norm.diagonal(), K1.diagonal()])
    else:
        A = sp.bmat([[M, C], [C.T, None]], format="csr")
        b = np.concatenate([load, np.zeros(N.ndofs)])
        diag = np.concatenate([M.diagonal(), n_norm.diagonal()])
    A.sort_indices()
    return A, b, jacobi_preconditioner(diag)


def run_stage2(spaces: SchemeSpaces, case: MmsCase, r_h: np.ndarray, config: SchemeConfig):
    """Saddle point solve for (phi, zeta, p) (scheme A) or (phi, zeta) (scheme B)."""
    A, b, pre = stage2_system(spaces, case, r_h, config)
    x, rep = minres_solve(A, b, tol=config.tol, maxit=config.maxit, preconditioner=pre)
    logger.info("stage 2 (%s): %d dofs, %d its, res %.2e",
                config.scheme, len(b), rep.iterations, rep.residual)
    _check("stage 2", rep, x)
    n1 = spaces.phi.ndofs
    n2 = n1 + spaces.ned.ndofs
    phi, zeta = x[:n1], x[n1:n2]
    p = x[n2:] if config.scheme == "A" else None
    return phi, zeta, p, rep


def run_stage3(spaces: SchemeSpaces, phi_h: np.ndarray, config: SchemeConfig):
    """Poisson problem ``(grad u, grad s) = (phi, grad s)``."""
    U = spaces.u
    K = assemble_bilinear(FormKind.GRAD_GRAD, U, U)
    B = assemble_bilinear(FormKind.VEC_GRAD_SCALAR, spaces.phi, U)
    x, rep = cg_solve(K, B @ phi_h, tol=config.tol, maxit=config.maxit, preconditioner="jacobi")
    logger.info("stage 3: %d dofs, %d its, res %.2e", U.ndofs, rep.iterations, rep.residual)
    return _check("stage 3", rep, x), rep


def run_scheme(case: MmsCase, config: SchemeConfig, mesh: Mesh | None = None,
               errors: bool = True):
    """Run all three stages and (optionally) measure errors.

    Returns ``(bundle, error_report)``; the report is None with ``errors=False``.
    """
    if config.verify:
        verify_case(case, raise_on_failure=True)
    mesh = build_box_mesh(config.n) if mesh is None else mesh
    spaces = build_spaces(mesh, config)
    r_h, rep1 = run_stage1(spaces, case, config)
    phi_h, zeta_h, p_h, rep2 = run_stage2(spaces, case, r_h, config)
    u_h, rep3 = run_stage3(spaces, phi_h, config)
    bundle = SolutionBundle(spaces, config.scheme, r_h, phi_h, zeta_h, p_h, u_h,
                            {"stage1": rep1, "stage2": rep2, "stage3": rep3})
    report = compute_errors(bundle, case, norm_degree=config.norm_degree) if errors else None
    return bundle, report


def _sq(wts, diff):
    d = np.asarray(diff)
    sq = d * d
    while sq.ndim > 2:
        sq = sq.sum(axis=-1)
    return float(np.sum(wts * sq))


# quadrature points held at once while measuring errors
_POINT_BUDGET = 200_000


def compute_errors(bundle: SolutionBundle, case: MmsCase, norm_degree: int | None = None
                   ) -> ErrorReport:
    """Quadrature norms of exact-minus-discrete fields.

    The default rule integrates the squared polynomial errors exactly. For
    scheme B only the curl part of the ``zeta`` error is reported.
    """
    sps = bundle.spaces
    mesh = sps.mesh
    deg = norm_degree or min(2 * max(case.degrees["u"], case.degrees["zeta"]), 30)
    rule = tet_rule(deg)
    fap = field_at_points

    sq = dict.fromkeys(["r0", "r1", "phi0", "phi1", "zeta0", "zeta_c", "u0", "u1", "p0", "p1"], 0.0)
    step = max(1, _POINT_BUDGET // len(rule))
    for start in range(0, mesh.n_cells, step):
        cells = np.arange(start, min(start + step, mesh.n_cells))
        geom = cell_geometry(mesh, cells)
        wts = np.outer(6.0 * geom.volume, rule.weights)
        pts = geom.to_physical(rule.points)
        sq["r0"] += _sq(wts, case.r(pts) - fap(sps.scalar, bundle.r, rule, "val", cells))
        sq["r1"] += _sq(wts, case.grad_r(pts) - fap(sps.scalar, bundle.r, rule, "grad", cells))
        sq["phi0"] += _sq(wts, case.phi(pts) - fap(sps.phi, bundle.phi, rule, "val", cells))
        sq["phi1"] += _sq(wts, case.grad_grad_u(pts) - fap(sps.phi, bundle.phi, rule, "grad", cells))
        sq["zeta0"] += _sq(wts, case.zeta(pts) - fap(sps.ned, bundle.zeta, rule, "val", cells))
        sq["zeta_c"] += _sq(wts, case.curl_zeta(pts) - fap(sps.ned, bundle.zeta, rule, "curl", cells))
        sq["u0"] += _sq(wts, case.u(pts) - fap(sps.u, bundle.u, rule, "val", cells))
        sq["u1"] += _sq(wts, case.grad_u(pts) - fap(sps.u, bundle.u, rule, "grad", cells))
        if bundle.p is not None:
            sq["p0"] += _sq(wts, fap(sps.scalar, bundle.p, rule, "val", cells))
            sq["p1"] += _sq(wts, fap(sps.scalar, bundle.p, rule, "grad", cells))

    gauge_free = bundle.scheme == "B"
    return ErrorReport(
        err_r_l2=math.sqrt(sq["r0"]),
        err_r_h1=math.sqrt(sq["r0"] + sq["r1"]),
        err_phi_l2=math.sqrt(sq["phi0"]),
        err_phi_h1=math.sqrt(sq["phi0"] + sq["phi1"]),
        err_zeta_l2=None if gauge_free else math.sqrt(sq["zeta0"]),
        err_zeta_hcurl=math.sqrt(sq["zeta_c"] + (0.0 if gauge_free else sq["zeta0"])),
        err_p_h1=None if bundle.p is None else math.sqrt(sq["p0"] + sq["p1"]),
        err_u_h1=math.sqrt(sq["u0"] + sq["u1"]),
        h=mesh.h,
        dofs=sps.dofs(bundle.scheme),
    )


def observed_rates(errors: list, hs: list) -> list:
    """Rates log(e_coarse / e_fine) / log(h_coarse / h_fine) between consecutive levels."""
    rates = []
    for (e0, h0), (e1, h1) in zip(zip(errors, hs), zip(errors[1:], hs[1:])):
        if e0 is None or e1 is None or e0 <= 0 or e1 <= 0:
            rates.append(None)
        else:
            rates.append(math.log(e0 / e1) / math.log(h0 / h1))
    return rates


def interpolate_nodal(space: FESpace, f) -> np.ndarray:
    """Nodal interpolant of a scalar function into a P1/P2 space (free DOFs only)."""
    fam = space.family.tag
    if fam not in (Family.P1, Family.P2) or space.components != 1:
        raise ValueError("nodal interpolation needs a scalar Lagrange space")
    mesh = space.mesh
    x = np.zeros(space.ndofs)
    vd = space.entity_dofs["vertex"][:, 0]
    keep = vd >= 0
    x[vd[keep]] = f(mesh.vertices[keep])
    if fam is Family.P2:
        ed = space.entity_dofs["edge"][:, 0]
        keep = ed >= 0
        mid = 0.5 * (mesh.vertices[mesh.edges[keep, 0]] + mesh.vertices[mesh.edges[keep, 1]])
        x[ed[keep]] = f(mid)
    return x


def discrete_norm(space: FESpace, x: np.ndarray, norm: str = "h1", degree: int | None = None
                  ) -> float:
    """Full H1, L2 or curl-L2 (``"curl"``) norm of a discrete field."""
    if norm not in ("h1", "l2", "curl"):
        raise ValueError(f"unknown norm {norm!r}")
    mesh = space.mesh
    fam_deg = space.family.degree
    rule = tet_rule(degree or max(2 * fam_deg, 1))
    total = 0.0
    step = max(1, _POINT_BUDGET // len(rule))
    for start in range(0, mesh.n_cells, step):
        cells = np.arange(start, min(start + step, mesh.n_cells))
        geom = cell_geometry(mesh, cells)
        wts = np.outer(6.0 * geom.volume, rule.weights)
        if norm == "curl":
            total += _sq(wts, field_at_points(space, x, rule, "curl", cells))
            continue
        total += _sq(wts, field_at_points(space, x, rule, "val", cells))
        if norm == "h1":
            total += _sq(wts, field_at_points(space, x, rule, "grad", cells))
    return math.sqrt(total)


def compare_schemes(case: MmsCase, n: int, phi_family: str = "p1", tol: float = 1e-12) -> dict:
    """Relative gaps between schemes A and B on one mesh.

    H1 gaps for ``r``, ``phi`` and ``u``; L2 gap of ``curl zeta`` (the only
    gauge-invariant part of ``zeta``). Gaps are relative to scheme A.
    """
    mesh = build_box_mesh(n)
    out = {}
    a, _ = run_scheme(case, SchemeConfig(scheme="A", n=n, phi_family=phi_family, tol=tol),
                      mesh=mesh, errors=False)
    b, _ = run_scheme(case, SchemeConfig(scheme="B", n=n, phi_family=phi_family, tol=tol,
                                         verify=False), mesh=mesh, errors=False)
    sps = a.spaces
    for name, space, norm, xa, xb in (
        ("r", sps.scalar, "h1", a.r, b.r),
        ("phi", sps.phi, "h1", a.phi, b.phi),
        ("u", sps.u, "h1", a.u, b.u),
        ("curl_zeta", sps.ned, "curl", a.zeta, b.zeta),
    ):
        ref = discrete_norm(space, xa, norm)
        gap = discrete_norm(space, xa - xb, norm)
        out[name] = gap / ref if ref > 0 else gap
    return out
