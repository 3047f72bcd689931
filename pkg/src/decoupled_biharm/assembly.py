"""Assembly of bilinear and linear forms into CSR matrices and dense vectors.

Every form is evaluated cellwise by quadrature; per-cell dense blocks are
scattered through COO triplets and summed into CSR. Cells are processed in
fixed-size chunks in mesh order, so results are deterministic.
"""
from __future__ import annotations

from enum import Enum

import numpy as np
import scipy.sparse as sp

from .elements import Family, eval_nedelec, nedelec_curls, tabulate
from .mesh import LOCAL_EDGES, CellGeometry, cell_geometry
from .quadrature import QuadRule, tet_rule
from .spaces import FESpace

__all__ = [
    "FormKind",
    "assemble_bilinear",
    "assemble_linear",
    "field_at_points",
    "quadrature_points",
    "export_matrix_market",
]

# upper bound on floats held by one chunk of per-point basis data
_CHUNK_BUDGET = 4_000_000


class FormKind(str, Enum):
    GRAD_GRAD = "GradGrad"              # (grad u, grad v), scalar
    DIV_DIV = "DivDiv"                  # (alpha div phi, div psi)
    CURL_CURL_VEC = "CurlCurlVec"       # (curl phi, curl psi), vector H1
    CURL_CURL_MIXED = "CurlCurlMixed"   # (curl zeta, curl psi), Nedelec trial, vector test
    NED_CURL_CURL = "NedCurlCurl"       # (curl zeta, curl eta)
    NED_MASS = "NedMass"                # (zeta, eta)
    NED_GRAD_SCALAR = "NedGradScalar"   # (eta, grad p), scalar trial, Nedelec test
    VEC_GRAD_SCALAR = "VecGradScalar"   # (phi, grad s), vector trial, scalar test
    VEC_H1_NORM = "VecH1Norm"           # (phi, psi) + (grad phi, grad psi)
    MASS = "Mass"                       # (u, v), scalar


def _kind_of(space: FESpace) -> str:
    if space.family.tag is Family.NED1:
        return "ned"
    return "vec" if space.components == 3 else "scalar"


# kind -> (trial kind, test kind, trial quantity, test quantity, symmetric)
_FORMS = {
    FormKind.GRAD_GRAD: ("scalar", "scalar", "grad", "grad", True),
    FormKind.MASS: ("scalar", "scalar", "val", "val", True),
    FormKind.DIV_DIV: ("vec", "vec", "div", "div", True),
    FormKind.CURL_CURL_VEC: ("vec", "vec", "curl", "curl", True),
    FormKind.CURL_CURL_MIXED: ("ned", "vec", "curl", "curl", False),
    FormKind.NED_CURL_CURL: ("ned", "ned", "curl", "curl", True),
    FormKind.NED_MASS: ("ned", "ned", "val", "val", True),
    FormKind.NED_GRAD_SCALAR: ("scalar", "ned", "grad", "val", False),
    FormKind.VEC_GRAD_SCALAR: ("vec", "scalar", "val", "grad", False),
    FormKind.VEC_H1_NORM: ("vec", "vec", "h1", "h1", True),
}

_DERIV_LOSS = {"val": 0, "grad": 1, "div": 1, "curl": 1, "h1": 0}


def _degree(space: FESpace, quantity: str) -> int:
    return max(space.family.degree - _DERIV_LOSS[quantity], 0)


def _basis_data(space: FESpace, rule: QuadRule, geom: CellGeometry, signs, quantity: str):
    """Local basis quantity at quadrature points, shape (C, Q, L, ...)."""
    nc = len(geom.volume)
    nq = len(rule)
    if space.family.tag is Family.NED1:
        vals, curls = eval_nedelec(rule.points, geom, signs)
        if quantity == "val":
            return vals
        if quantity == "curl":
            return np.broadcast_to(curls[:, None], (nc, nq) + curls.shape[1:])
        raise ValueError(f"Nedelec space has no {quantity!r} data")

    vals, dlam = tabulate(space.family, rule.points)
    grads = np.einsum("qbj,cjk->cqbk", dlam, geom.grad_lambda)
    nl = vals.shape[1]
    if space.components == 1:
        if quantity == "val":
            return np.broadcast_to(vals[None], (nc, nq, nl))
        if quantity == "grad":
            return grads
        raise ValueError(f"scalar space has no {quantity!r} data")

    eye = np.eye(3)
    if quantity == "val":
        # (C, Q, 3L, 3): basis (c, b) is s_b e_c
        v = np.einsum("qb,cd->qcbd", vals, eye).reshape(nq, 3 * nl, 3)
        return np.broadcast_to(v[None], (nc, nq, 3 * nl, 3))
    if quantity == "div":
        # d/dx_c of s_b
        return np.transpose(grads, (0, 1, 3, 2)).reshape(nc, nq, 3 * nl)
    if quantity == "curl":
        # grad(s_b) x e_c
        out = np.empty((nc, nq, 3, nl, 3))
        for c in range(3):
            out[:, :, c] = np.cross(grads, eye[c])
        return out.reshape(nc, nq, 3 * nl, 3)
    if quantity == "grad":
        # (C, Q, 3L, 3, 3): row c of the Jacobian is grad s_b
        out = np.zeros((nc, nq, 3, nl, 3, 3))
        for c in range(3):
            out[:, :, c, :, c, :] = grads
        return out.reshape(nc, nq, 3 * nl, 3, 3)
    raise ValueError(f"vector space has no {quantity!r} data")


def _pair(test, trial, wts):
    """sum_q w_q <test_i, trial_j> over trailing axes; wts has shape (C, Q)."""
    extra = "xyz"[: test.ndim - 3]
    spec = f"cqi{extra},cqj{extra},cq->cij"
    return np.einsum(spec, test, trial, wts, optimize=True)


def _scatter(blocks, rows, cols, shape):
    """Sum per-cell blocks into a CSR matrix, skipping eliminated DOFs."""
    r = np.broadcast_to(rows[:, :, None], blocks.shape).ravel()
    c = np.broadcast_to(cols[:, None, :], blocks.shape).ravel()
    v = blocks.ravel()
    keep = (r >= 0) & (c >= 0)
    mat = sp.coo_matrix((v[keep], (r[keep], c[keep])), shape=shape).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def _chunks(space_sizes: int, nq: int, nc: int):
    size = max(1, _CHUNK_BUDGET // max(1, nq * space_sizes))
    for start in range(0, nc, size):
        yield slice(start, min(nc, start + size))


def _alpha_at(alpha, pts):
    if alpha is None:
        return 1.0
    if callable(alpha):
        return np.asarray(alpha(pts), dtype=float)
    return float(alpha)


def assemble_bilinear(kind, trial: FESpace, test: FESpace, alpha=None,
                      quad: QuadRule | None = None) -> sp.csr_matrix:
    """Assemble ``a(trial_j, test_i)`` into a CSR matrix of shape (test, trial).

    ``alpha`` (callable on (..., 3) points, or a constant) is admissible for
    ``DivDiv`` only and is sampled at quadrature nodes.
    """
    kind = FormKind(kind)
    trial_kind, test_kind, q_trial, q_test, symmetric = _FORMS[kind]
    if _kind_of(trial) != trial_kind or _kind_of(test) != test_kind:
        raise ValueError(
            f"{kind.value} needs ({trial_kind} trial, {test_kind} test), "
            f"got ({_kind_of(trial)}, {_kind_of(test)})"
        )
    if trial.mesh is not test.mesh:
        raise ValueError("trial and test spaces live on different meshes")
    if alpha is not None and kind is not FormKind.DIV_DIV:
        raise ValueError("a coefficient is only admissible for DivDiv")
    if quad is None:
        deg = _degree(trial, q_trial) + _degree(test, q_test) + (1 if alpha is not None else 0)
        quad = tet_rule(max(deg, 1))

    mesh = trial.mesh
    nl_test = test.cell_dofs.shape[1]
    nl_trial = trial.cell_dofs.shape[1]
    width = (nl_test + nl_trial) * 9
    blocks = np.empty((mesh.n_cells, nl_test, nl_trial))
    for sl in _chunks(width, len(quad), mesh.n_cells):
        geom = cell_geometry(mesh, np.arange(sl.start, sl.stop))
        wts = np.outer(6.0 * geom.volume, quad.weights)
        if kind is FormKind.DIV_DIV and alpha is not None:
            wts = wts * _alpha_at(alpha, geom.to_physical(quad.points))
        if kind is FormKind.VEC_H1_NORM:
            blk = (_pair(_basis_data(test, quad, geom, None, "val"),
                         _basis_data(trial, quad, geom, None, "val"), wts)
                   + _pair(_basis_data(test, quad, geom, None, "grad"),
                           _basis_data(trial, quad, geom, None, "grad"), wts))
        else:
            a = _basis_data(test, quad, geom, test.cell_signs[sl], q_test)
            b = _basis_data(trial, quad, geom, trial.cell_signs[sl], q_trial)
            blk = _pair(a, b, wts)
        blocks[sl] = blk
    if symmetric and trial is test:
        blocks = 0.5 * (blocks + np.transpose(blocks, (0, 2, 1)))
    return _scatter(blocks, test.cell_dofs, trial.cell_dofs, (test.ndofs, trial.ndofs))


def quadrature_points(mesh, quad: QuadRule) -> np.ndarray:
    """Physical quadrature points of every cell, shape (C, Q, 3)."""
    return cell_geometry(mesh).to_physical(quad.points)


def assemble_linear(space: FESpace, f, quad: QuadRule, mode: str = "value",
                    cellwise: bool = False) -> np.ndarray:
    """Assemble a load vector.

    ``mode="value"`` pairs f with the basis (``<f, psi_i>``); ``mode="grad"``
    pairs a vector f with basis gradients of a scalar space (``<f, grad v_i>``).
    ``f`` is a callable on (..., 3) point arrays, or with ``cellwise=True`` a
    callable ``f(points, cells)`` (for integrands built from discrete fields),
    or an array of samples at the physical quadrature points of shape (C, Q[, 3]).
    """
    if mode not in ("value", "grad"):
        raise ValueError(f"unknown pairing mode {mode!r}")
    mesh = space.mesh
    kind = _kind_of(space)
    quantity = "val" if mode == "value" else "grad"
    if mode == "grad" and kind != "scalar":
        raise ValueError("gradient pairing needs a scalar space")
    nl = space.cell_dofs.shape[1]
    local = np.empty((mesh.n_cells, nl))
    for sl in _chunks(nl * 9, len(quad), mesh.n_cells):
        geom = cell_geometry(mesh, np.arange(sl.start, sl.stop))
        if cellwise:
            fx = np.asarray(f(geom.to_physical(quad.points), np.arange(sl.start, sl.stop)),
                            dtype=float)
        elif callable(f):
            fx = np.asarray(f(geom.to_physical(quad.points)), dtype=float)
        else:
            fx = np.asarray(f, dtype=float)[sl]
        basis = _basis_data(space, quad, geom, space.cell_signs[sl], quantity)
        wts = np.outer(6.0 * geom.volume, quad.weights)
        if basis.ndim == 3:
            fx = np.broadcast_to(fx, basis.shape[:2])
            local[sl] = np.einsum("cqi,cq,cq->ci", basis, fx, wts)
        else:
            fx = np.broadcast_to(fx, basis.shape[:2] + (3,))
            local[sl] = np.einsum("cqix,cqx,cq->ci", basis, fx, wts)
    dofs = space.cell_dofs.ravel()
    keep = dofs >= 0
    return np.bincount(dofs[keep], weights=local.ravel()[keep], minlength=space.ndofs)


def field_at_points(space: FESpace, x: np.ndarray, quad: QuadRule, quantity: str = "val",
                    cells=None) -> np.ndarray:
    """Evaluate a discrete field (or its grad/div/curl) at quadrature points.

    Returns (C, Q) for scalar quantities, (C, Q, 3) for vectors and
    (C, Q, 3, 3) for the gradient of a vector field (row = component).
    """
    mesh = space.mesh
    # orientation is folded into the coefficients, so basis data is unsigned
    coeff = space.cell_values(x)  # (C, comps, L)
    if cells is not None:
        coeff = coeff[np.asarray(cells)]
        geom = cell_geometry(mesh, cells)
    else:
        geom = cell_geometry(mesh)
    nc, ncomp, _ = coeff.shape
    nq = len(quad)
    lam = quad.points

    if space.family.tag is Family.NED1:
        cf = coeff[:, 0]
        g = geom.grad_lambda
        if quantity == "curl":
            curls = nedelec_curls(geom)
            cc = np.einsum("clx,cl->cx", curls, cf)
            return np.broadcast_to(cc[:, None], (nc, nq, 3))
        if quantity != "val":
            raise ValueError(f"Nedelec field has no {quantity!r}")
        # field = sum_j lambda_j H_j with H_j collecting the edge terms touching j
        H = np.zeros((nc, 4, 3))
        for e, (a, b) in enumerate(LOCAL_EDGES):
            H[:, a] += cf[:, e, None] * g[:, b]
            H[:, b] -= cf[:, e, None] * g[:, a]
        return np.matmul(lam[None], H)

    vals, dlam = tabulate(space.family, lam)
    if quantity == "val":
        v = np.matmul(coeff, vals.T)  # (C, comps, Q)
        v = np.transpose(v, (0, 2, 1))
        return v[..., 0] if ncomp == 1 else v
    # barycentric derivatives of the field, then chain rule
    T = np.matmul(coeff, dlam.transpose(1, 0, 2).reshape(dlam.shape[1], nq * 4))
    T = T.reshape(nc, ncomp, nq, 4).transpose(0, 2, 1, 3).reshape(nc, nq * ncomp, 4)
    G = np.matmul(T, geom.grad_lambda).reshape(nc, nq, ncomp, 3)
    if quantity == "grad":
        return G[:, :, 0] if ncomp == 1 else G
    if ncomp == 1:
        raise ValueError(f"scalar field has no {quantity!r}")
    if quantity == "div":
        return G[:, :, 0, 0] + G[:, :, 1, 1] + G[:, :, 2, 2]
    if quantity == "curl":
        return np.stack([
            G[:, :, 2, 1] - G[:, :, 1, 2],
            G[:, :, 0, 2] - G[:, :, 2, 0],
            G[:, :, 1, 0] - G[:, :, 0, 1],
        ], axis=-1)
    raise ValueError(f"unknown quantity {quantity!r}")


def export_matrix_market(matrix, path) -> None:
    """Write an assembled matrix in Matrix Market coordinate format."""
    from scipy.io import mmwrite

    mmwrite(str(path), sp.csr_matrix(matrix))
