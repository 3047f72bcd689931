"""Dense estimate of the discrete inf-sup constant of the curl coupling.

For Nedelec fields ``eta`` that are L2-orthogonal to discrete gradients,

    beta_h = inf_eta sup_phi (curl phi, curl eta) / (||phi||_1 ||eta||_curl),

with ``phi`` in the vector bubble-enriched space. The supremum is the dual
norm ``sqrt(eta^T C^T A1^{-1} C eta)`` with A1 the H1 Gram matrix, so
``beta_h**2`` is the smallest eigenvalue of a generalised problem on the
constrained subspace.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .assembly import FormKind, assemble_bilinear
from .elements import Family
from .linalg import sym_eig_dense
from .mesh import build_box_mesh
from .scheme import PHI_FAMILIES
from .spaces import build_space

__all__ = ["InfSupReport", "InfSupLevel", "estimate_infsup", "infsup_study", "MAX_DENSE_N"]

MAX_DENSE_N = 3


@dataclass
class InfSupLevel:
    n: int
    dim_ned: int
    dim_constraint: int
    dim_phi: int
    beta: float


@dataclass
class InfSupReport:
    levels: list = field(default_factory=list)

    @property
    def betas(self) -> list:
        return [lv.beta for lv in self.levels]

    @property
    def ratio(self) -> float:
        b = self.betas
        return min(b) / max(b)


def _operators(mesh, phi_family: str):
    V = build_space(mesh, PHI_FAMILIES[phi_family], components=3)
    N = build_space(mesh, Family.NED1)
    S = build_space(mesh, Family.P1)
    A1 = assemble_bilinear(FormKind.VEC_H1_NORM, V, V).toarray()
    C = assemble_bilinear(FormKind.CURL_CURL_MIXED, N, V).toarray()
    Gp = assemble_bilinear(FormKind.NED_GRAD_SCALAR, S, N).toarray()
    Nn = (assemble_bilinear(FormKind.NED_MASS, N, N)
          + assemble_bilinear(FormKind.NED_CURL_CURL, N, N)).toarray()
    return V, N, S, A1, C, Gp, Nn


def constrained_basis(Gp: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of ``{zeta : Gp^T zeta = 0}`` from the Gram matrix ``Gp Gp^T``."""
    nz = Gp.shape[0]
    if Gp.shape[1] == 0:
        return np.eye(nz)
    mu, V = sym_eig_dense(Gp @ Gp.T)
    scale = max(abs(mu[-1]), 1.0e-300)
    return V[:, mu <= rel_tol * scale]


def estimate_infsup(n: int, phi_family: str = "p1", return_details: bool = False,
                    mesh=None):
    """Discrete inf-sup constant on the ``n``-subdivision cube mesh (n <= 3).

    ``mesh`` overrides the generated cube mesh (e.g. a relabelled copy).
    """
    if not 1 <= n <= MAX_DENSE_N:
        raise ValueError(f"dense inf-sup estimate supports 1 <= n <= {MAX_DENSE_N}, got {n}")
    if phi_family not in PHI_FAMILIES:
        raise ValueError(f"phi_family must be one of {sorted(PHI_FAMILIES)}")
    V, N, S, A1, C, Gp, Nn = _operators(build_box_mesh(n) if mesh is None else mesh, phi_family)
    Z = constrained_basis(Gp)
    if Z.shape[1] != N.ndofs - S.ndofs:
        raise RuntimeError(
            f"constraint null space has dimension {Z.shape[1]}, expected {N.ndofs - S.ndofs}"
        )
    factor = cho_factor(A1)
    schur = C.T @ cho_solve(factor, C)
    mu, _ = sym_eig_dense(Z.T @ schur @ Z, Z.T @ Nn @ Z)
    beta = float(np.sqrt(max(mu[0], 0.0)))
    level = InfSupLevel(n=n, dim_ned=N.ndofs, dim_constraint=S.ndofs, dim_phi=V.ndofs, beta=beta)
    if return_details:
        return level, {"A1": A1, "C": C, "Gp": Gp, "N": Nn, "Z": Z, "schur": schur, "mu": mu}
    return level


def infsup_study(levels, phi_family: str = "p1") -> InfSupReport:
    return InfSupReport([estimate_infsup(n, phi_family) for n in levels])
