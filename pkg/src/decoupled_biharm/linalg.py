"""Krylov solvers and a dense symmetric-definite eigensolver.

Both iterative solvers stop on the true relative residual
``||b - A x|| / ||b||``: when the recurrence estimate says the tolerance is
met the residual is recomputed, and the iteration is restarted from the
current iterate if rounding has let the two drift apart.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "SolveReport",
    "LinAlgError",
    "cg_solve",
    "minres_solve",
    "sym_eig_dense",
    "jacobi_preconditioner",
    "default_maxit",
]

logger = logging.getLogger(__name__)


class LinAlgError(ValueError):
    """Raised for invalid solver input (e.g. a non-SPD mass matrix)."""


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    wall_time: float
    restarts: int = 0
    history: list = field(default_factory=list, repr=False)


def default_maxit(n: int) -> int:
    return int(200 * np.sqrt(n)) + 10000


def jacobi_preconditioner(diagonal) -> np.ndarray:
    """Inverse of the absolute diagonal; zero entries are left unscaled."""
    d = np.abs(np.asarray(diagonal, dtype=float))
    inv = np.ones_like(d)
    nz = d > 0
    inv[nz] = 1.0 / d[nz]
    return inv


def _resolve_precond(A, preconditioner, n):
    if preconditioner is None or (isinstance(preconditioner, str) and preconditioner == "none"):
        return None
    if isinstance(preconditioner, str):
        if preconditioner in ("jacobi", "jacobi-abs"):
            return jacobi_preconditioner(A.diagonal())
        raise ValueError(f"unknown preconditioner {preconditioner!r}")
    inv = np.asarray(preconditioner, dtype=float)
    if inv.shape != (n,) or np.any(inv <= 0):
        raise ValueError("a preconditioner array must hold n positive inverse-diagonal entries")
    return inv


def cg_solve(A, b, tol: float = 1e-12, maxit: int | None = None, preconditioner=None,
             x0=None):
    """Preconditioned conjugate gradients for SPD ``A``.

    Returns ``(x, SolveReport)``; non-convergence is reported, not raised.
    """
    t0 = time.perf_counter()
    b = np.asarray(b, dtype=float)
    n = len(b)
    maxit = default_maxit(n) if maxit is None else maxit
    minv = _resolve_precond(A, preconditioner, n)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True, time.perf_counter() - t0)

    r = b - A @ x
    its = 0
    restarts = 0
    history = [np.linalg.norm(r) / bnorm]
    while True:
        z = r if minv is None else minv * r
        p = z.copy()
        rz = r @ z
        while its < maxit:
            if np.linalg.norm(r) <= tol * bnorm:
                break
            Ap = A @ p
            pAp = p @ Ap
            if pAp <= 0:
                logger.debug("cg: non-positive curvature %g", pAp)
                its = maxit
                break
            a = rz / pAp
            x += a * p
            r -= a * Ap
            its += 1
            history.append(np.linalg.norm(r) / bnorm)
            z = r if minv is None else minv * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        r = b - A @ x
        res = np.linalg.norm(r) / bnorm
        if res <= tol or its >= maxit or restarts >= 20:
            break
        restarts += 1
    rep = SolveReport(its, float(res), bool(res <= tol), time.perf_counter() - t0, restarts, history)
    logger.debug("cg: %s", rep)
    return x, rep


def _minres_cycle(A, r0, minv, tol_abs_est, maxit, history, bnorm):
    """One preconditioned MINRES run for ``A d = r0`` from d = 0.

    Stops when the preconditioned residual estimate drops below
    ``tol_abs_est`` (scaled to the initial estimate) or after ``maxit`` steps.
    """
    n = len(r0)
    d = np.zeros(n)
    v_old = np.zeros(n)
    v = r0.copy()
    z = v if minv is None else minv * v
    gamma = np.sqrt(max(z @ v, 0.0))
    if gamma == 0.0:
        return d, 0
    gamma_old = 1.0
    eta = gamma
    eta0 = gamma
    c_old, c = 1.0, 1.0
    s_old, s = 0.0, 0.0
    w_old = np.zeros(n)
    w = np.zeros(n)
    # |eta| tracks the M^{-1}-norm residual; convert the target with the first ratio
    ratio = np.linalg.norm(r0) / eta0
    its = 0
    while its < maxit:
        z = z / gamma
        Az = A @ z
        delta = Az @ z
        v_new = Az - (delta / gamma) * v - (gamma / gamma_old) * v_old
        z_new = v_new if minv is None else minv * v_new
        gamma_new = np.sqrt(max(z_new @ v_new, 0.0))
        a0 = c * delta - c_old * s * gamma
        a1 = np.hypot(a0, gamma_new)
        a2 = s * delta + c_old * c * gamma
        a3 = s_old * gamma
        if a1 == 0.0:
            break
        c_new, s_new = a0 / a1, gamma_new / a1
        w_new = (z - a3 * w_old - a2 * w) / a1
        d += (c_new * eta) * w_new
        eta = -s_new * eta
        its += 1
        history.append(abs(eta) * ratio / bnorm)
        if abs(eta) <= tol_abs_est or gamma_new == 0.0:
            break
        v_old, v = v, v_new
        z = z_new
        gamma_old, gamma = gamma, gamma_new
        c_old, c = c, c_new
        s_old, s = s, s_new
        w_old, w = w, w_new
    return d, its


def minres_solve(A, b, tol: float = 1e-12, maxit: int | None = None, preconditioner=None,
                 x0=None, max_restarts: int = 30):
    """Preconditioned MINRES for symmetric (possibly indefinite or singular) ``A``.

    ``preconditioner`` is ``None``, ``"jacobi-abs"`` (inverse absolute
    diagonal) or an array of positive inverse-diagonal weights. For singular
    consistent systems the kernel component of ``x`` is unspecified.
    """
    t0 = time.perf_counter()
    b = np.asarray(b, dtype=float)
    n = len(b)
    maxit = default_maxit(n) if maxit is None else maxit
    minv = _resolve_precond(A, preconditioner, n)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True, time.perf_counter() - t0)

    history = []
    its = 0
    restarts = 0
    r = b - A @ x
    res = np.linalg.norm(r) / bnorm
    while res > tol and its < maxit:
        z = r if minv is None else minv * r
        est0 = np.sqrt(max(r @ z, 0.0))
        # aim a little below the target: the preconditioned and true norms differ
        target = 0.5 * tol * bnorm / (res * bnorm) * est0
        d, k = _minres_cycle(A, r, minv, target, maxit - its, history, bnorm)
        its += k
        x += d
        r = b - A @ x
        new_res = np.linalg.norm(r) / bnorm
        if new_res > tol:
            if restarts >= max_restarts or new_res > 0.9 * res or k == 0:
                res = new_res
                logger.debug("minres: stagnation at residual %.3e", res)
                break
            restarts += 1
        res = new_res
    rep = SolveReport(its, float(res), bool(res <= tol), time.perf_counter() - t0, restarts, history)
    logger.debug("minres: %s", rep)
    return x, rep


def _round_robin(m: int):
    """Pairings of range(m) (m even) covering every pair once over m - 1 rounds."""
    idx = list(range(m))
    for _ in range(m - 1):
        yield [(idx[i], idx[m - 1 - i]) for i in range(m // 2)]
        idx = [idx[0], idx[-1]] + idx[1:-1]


def _jacobi_eig(S, tol=1e-12, max_sweeps=60):
    """Cyclic Jacobi with a parallel (round-robin) ordering of disjoint rotations."""
    A = np.array(S, dtype=float)
    n = len(A)
    V = np.eye(n)
    if n == 1:
        return A.diagonal().copy(), V
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n), V
    m = n + (n % 2)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for pairs in _round_robin(m):
            pairs = np.array([(p, q) if p < q else (q, p) for p, q in pairs if max(p, q) < n])
            if len(pairs) == 0:
                continue
            P, Q = pairs[:, 0], pairs[:, 1]
            apq = A[P, Q]
            active = np.abs(apq) > 1e-300
            if not active.any():
                continue
            P, Q, apq = P[active], Q[active], apq[active]
            tau = (A[Q, Q] - A[P, P]) / (2.0 * apq)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            AP, AQ = A[:, P].copy(), A[:, Q].copy()
            A[:, P] = c * AP - s * AQ
            A[:, Q] = s * AP + c * AQ
            AP, AQ = A[P, :].copy(), A[Q, :].copy()
            A[P, :] = c[:, None] * AP - s[:, None] * AQ
            A[Q, :] = s[:, None] * AP + c[:, None] * AQ
            A[P, Q] = 0.0
            A[Q, P] = 0.0
            VP, VQ = V[:, P].copy(), V[:, Q].copy()
            V[:, P] = c * VP - s * VQ
            V[:, Q] = s * VP + c * VQ
    return A.diagonal().copy(), V


def sym_eig_dense(A, B=None, tol: float = 1e-12):
    """All eigenpairs of ``A x = mu B x`` for symmetric A and SPD B.

    B is reduced by Cholesky, the standard problem is diagonalised by cyclic
    Jacobi rotations. Eigenvalues ascend; eigenvectors are B-orthonormal.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise LinAlgError("A must be square")
    A = 0.5 * (A + A.T)
    if B is None:
        mu, V = _jacobi_eig(A, tol)
        order = np.argsort(mu, kind="stable")
        return mu[order], V[:, order]
    B = np.asarray(B, dtype=float)
    if B.shape != A.shape:
        raise LinAlgError("A and B must have the same shape")
    try:
        L = np.linalg.cholesky(0.5 * (B + B.T))
    except np.linalg.LinAlgError as exc:
        raise LinAlgError("B is not symmetric positive definite") from exc
    Y = solve_triangular(L, A, lower=True)
    S = solve_triangular(L, Y.T, lower=True)
    mu, W = _jacobi_eig(0.5 * (S + S.T), tol)
    X = solve_triangular(L.T, W, lower=False)
    order = np.argsort(mu, kind="stable")
    return mu[order], X[:, order]
