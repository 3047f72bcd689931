"""Manufactured solutions for the clamped bi-Laplacian on the unit cube.

With ``w = x(1-x) y(1-y) z(1-z)`` and ``g = w**2`` every case uses

    u = g,  phi = grad g,  r = w,  zeta = curl(g, 0, 0),  p = 0,
    f1 = lap r,
    f2 = -grad(alpha lap u) + grad r + curl curl zeta,

so the three-stage decoupled system is satisfied exactly by
``(r, grad u, zeta, 0, u)``. All fields are separable polynomials and are
evaluated from 1D factors and their derivatives.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

__all__ = ["MmsCase", "MmsError", "VerifyReport", "mms_case", "verify_case", "exact_norms",
           "CASE_NAMES"]

CASE_NAMES = ("poly", "var-alpha")

_A1 = Polynomial([0.0, 1.0, -1.0])  # t (1 - t)
_A2 = _A1 ** 2
_D1 = [_A1.deriv(k) if k else _A1 for k in range(5)]
_D2 = [_A2.deriv(k) if k else _A2 for k in range(5)]


class MmsError(RuntimeError):
    """A manufactured case failed its self-verification."""


def _sep(table, i, j, k, p):
    p = np.asarray(p, dtype=float)
    return table[i](p[..., 0]) * table[j](p[..., 1]) * table[k](p[..., 2])


def _g(i, j, k):
    return lambda p: _sep(_D2, i, j, k, p)


def _w(i, j, k):
    return lambda p: _sep(_D1, i, j, k, p)


def _lap_g(p):
    return _sep(_D2, 2, 0, 0, p) + _sep(_D2, 0, 2, 0, p) + _sep(_D2, 0, 0, 2, p)


def _grad_lap_g(p):
    return np.stack([
        _sep(_D2, 3, 0, 0, p) + _sep(_D2, 1, 2, 0, p) + _sep(_D2, 1, 0, 2, p),
        _sep(_D2, 2, 1, 0, p) + _sep(_D2, 0, 3, 0, p) + _sep(_D2, 0, 1, 2, p),
        _sep(_D2, 2, 0, 1, p) + _sep(_D2, 0, 2, 1, p) + _sep(_D2, 0, 0, 3, p),
    ], axis=-1)


def _vec(*fs):
    return lambda p: np.stack([f(p) for f in fs], axis=-1)


def _zero_scalar(p):
    return np.zeros(np.shape(p)[:-1])


def _zero_vector(p):
    return np.zeros(np.shape(p))


@dataclass(frozen=True)
class MmsCase:
    """Closed-form exact fields and data of one manufactured case.

    Every evaluator maps points of shape (..., 3) to (...,) or (..., 3).
    ``degrees`` records polynomial degrees for quadrature selection.
    """

    name: str
    alpha: Callable
    grad_alpha: Callable
    u: Callable
    grad_u: Callable
    lap_u: Callable
    grad_grad_u: Callable
    r: Callable
    grad_r: Callable
    zeta: Callable
    curl_zeta: Callable
    f1: Callable
    f2: Callable
    alpha_bounds: tuple
    degrees: dict
    zero_data: bool = False

    def p(self, pts):
        return _zero_scalar(pts)

    def grad_p(self, pts):
        return _zero_vector(pts)

    def phi(self, pts):
        return self.grad_u(pts)

    def with_zero_data(self) -> "MmsCase":
        """Same exact fields, homogeneous data; the discrete solution is zero."""
        return dataclasses.replace(self, name=self.name + "+zero", f1=_zero_scalar,
                                   f2=_zero_vector, zero_data=True)


def mms_case(name: str) -> MmsCase:
    """Build the ``"poly"`` (alpha = 1) or ``"var-alpha"`` (alpha = 1 + x/2) case."""
    if name == "poly":
        alpha = lambda p: np.ones(np.shape(p)[:-1])  # noqa: E731
        grad_alpha = _zero_vector
        bounds = (1.0, 1.0)
    elif name == "var-alpha":
        alpha = lambda p: 1.0 + 0.5 * np.asarray(p)[..., 0]  # noqa: E731
        grad_alpha = lambda p: np.broadcast_to(  # noqa: E731
            np.array([0.5, 0.0, 0.0]), np.shape(p)).copy()
        bounds = (1.0, 1.5)
    else:
        raise ValueError(f"unknown manufactured case {name!r}; choose from {CASE_NAMES}")

    u = _g(0, 0, 0)
    grad_u = _vec(_g(1, 0, 0), _g(0, 1, 0), _g(0, 0, 1))
    r = _w(0, 0, 0)
    grad_r = _vec(_w(1, 0, 0), _w(0, 1, 0), _w(0, 0, 1))

    def grad_grad_u(p):
        rows = []
        for a in range(3):
            row = []
            for b in range(3):
                idx = [0, 0, 0]
                idx[a] += 1
                idx[b] += 1
                row.append(_sep(_D2, *idx, p))
            rows.append(np.stack(row, axis=-1))
        return np.stack(rows, axis=-2)

    def zeta(p):
        return np.stack([_zero_scalar(p), _sep(_D2, 0, 0, 1, p), -_sep(_D2, 0, 1, 0, p)], axis=-1)

    def curl_zeta(p):
        return np.stack([
            -_sep(_D2, 0, 2, 0, p) - _sep(_D2, 0, 0, 2, p),
            _sep(_D2, 1, 1, 0, p),
            _sep(_D2, 1, 0, 1, p),
        ], axis=-1)

    def f1(p):
        return _sep(_D1, 2, 0, 0, p) + _sep(_D1, 0, 2, 0, p) + _sep(_D1, 0, 0, 2, p)

    def f2(p):
        lap = _lap_g(p)
        grad_lap = _grad_lap_g(p)
        curlcurl = np.stack([_zero_scalar(p), -grad_lap[..., 2], grad_lap[..., 1]], axis=-1)
        return (-(grad_alpha(p) * lap[..., None] + alpha(p)[..., None] * grad_lap)
                + grad_r(p) + curlcurl)

    return MmsCase(
        name=name,
        alpha=alpha,
        grad_alpha=grad_alpha,
        u=u,
        grad_u=grad_u,
        lap_u=_lap_g,
        grad_grad_u=grad_grad_u,
        r=r,
        grad_r=grad_r,
        zeta=zeta,
        curl_zeta=curl_zeta,
        f1=f1,
        f2=f2,
        alpha_bounds=bounds,
        degrees={"u": 12, "phi": 11, "grad_phi": 10, "r": 6, "zeta": 11, "curl_zeta": 10,
                 "f1": 4, "f2": 10 if name == "poly" else 11, "alpha": 0 if name == "poly" else 1},
    )


@dataclass
class VerifyReport:
    case: str
    errors: dict
    tol: float

    @property
    def failures(self) -> list:
        return [k for k, v in self.errors.items() if not v <= self.tol]

    @property
    def passed(self) -> bool:
        return not self.failures

    def __str__(self) -> str:
        lines = [f"verify {self.case}: {'PASS' if self.passed else 'FAIL'}"]
        for k, v in self.errors.items():
            lines.append(f"  {k:<18s} {v:.3e} {'ok' if v <= self.tol else 'MISMATCH'}")
        return "\n".join(lines)


def _fd_grad(f, p, h):
    out = []
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        out.append((f(p + e) - f(p - e)) / (2 * h))
    return np.stack(out, axis=-1)


def _fd_lap(f, p, h):
    total = -6.0 * f(p)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        total = total + f(p + e) + f(p - e)
    return total / h ** 2


def _fd_curl(F, p, h):
    J = []  # J[i][..., j] = d F_j / d x_i
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        J.append((F(p + e) - F(p - e)) / (2 * h))
    return np.stack([
        J[1][..., 2] - J[2][..., 1],
        J[2][..., 0] - J[0][..., 2],
        J[0][..., 1] - J[1][..., 0],
    ], axis=-1)


def _boundary_points(rng, m):
    p = rng.uniform(0.0, 1.0, size=(m, 3))
    axis = rng.integers(0, 3, size=m)
    side = rng.integers(0, 2, size=m).astype(float)
    p[np.arange(m), axis] = side
    return p


def verify_case(case: MmsCase, n_points: int = 200, step: float = 1e-4, tol: float = 1e-5,
                seed: int = 0, raise_on_failure: bool = False) -> VerifyReport:
    """Check the hardcoded derivatives of a case against finite differences.

    Data are rebuilt from numerically differentiated ``u``, ``alpha``, ``r``
    and ``zeta`` at random interior points and compared with the closed-form
    evaluators; boundary vanishing of ``u``, ``grad u``, ``r`` and ``zeta`` is
    checked on random boundary points.
    """
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.05, 0.95, size=(n_points, 3))
    h = step
    err = {}

    def gap(a, b):
        return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))

    err["grad_u"] = gap(case.grad_u(pts), _fd_grad(case.u, pts, h))
    err["lap_u"] = gap(case.lap_u(pts), _fd_lap(case.u, pts, h))
    err["grad_r"] = gap(case.grad_r(pts), _fd_grad(case.r, pts, h))
    err["grad_alpha"] = gap(case.grad_alpha(pts), _fd_grad(case.alpha, pts, h))
    err["curl_zeta"] = gap(case.curl_zeta(pts), _fd_curl(case.zeta, pts, h))
    err["div_zeta"] = gap(0.0, sum(_fd_grad(lambda q, i=i: case.zeta(q)[..., i], pts, h)[..., i]
                                   for i in range(3)))
    if case.zero_data:
        err["f1"] = gap(case.f1(pts), 0.0)
        err["f2"] = gap(case.f2(pts), 0.0)
    else:
        err["f1"] = gap(case.f1(pts), _fd_lap(case.r, pts, h))

        def alpha_lap(q):
            return case.alpha(q) * _fd_lap(case.u, q, h)

        curlcurl = _fd_curl(lambda q: _fd_curl(case.zeta, q, h), pts, h)
        f2_fd = -_fd_grad(alpha_lap, pts, h) + _fd_grad(case.r, pts, h) + curlcurl
        err["f2"] = gap(case.f2(pts), f2_fd)

    bpts = _boundary_points(rng, n_points)
    err["boundary_u"] = gap(case.u(bpts), 0.0)
    err["boundary_grad_u"] = gap(case.grad_u(bpts), 0.0)
    err["boundary_r"] = gap(case.r(bpts), 0.0)
    err["boundary_zeta"] = gap(case.zeta(bpts), 0.0)
    lo, hi = case.alpha_bounds
    a = case.alpha(pts)
    err["alpha_bounds"] = float(max(0.0, lo - a.min(), a.max() - hi, -lo))

    report = VerifyReport(case.name, err, tol)
    if raise_on_failure and not report.passed:
        raise MmsError(str(report))
    return report


# Exact norms. Each field component is a list of separable terms
# (coef, table, (i, j, k)); squared L2 norms reduce to products of 1D integrals.

def _int01(p: Polynomial) -> float:
    P = p.integ()
    return float(P(1.0) - P(0.0))


def _sq_norm(components) -> float:
    total = 0.0
    for terms in components:
        for ca, ta, ia in terms:
            for cb, tb, ib in terms:
                total += ca * cb * math.prod([_int01(ta[a] * tb[b]) for a, b in zip(ia, ib)])
    return total


def _unit(axis, order=1):
    idx = [0, 0, 0]
    idx[axis] += order
    return tuple(idx)


def exact_norms() -> dict:
    """Closed-form norms of the exact fields (identical for every case).

    Keys mirror :class:`ErrorReport` fields: the error of a zero bundle.
    """
    r = [[(1.0, _D1, (0, 0, 0))]]
    grad_r = [[(1.0, _D1, _unit(a))] for a in range(3)]
    u = [[(1.0, _D2, (0, 0, 0))]]
    grad_u = [[(1.0, _D2, _unit(a))] for a in range(3)]
    hess_u = [[(1.0, _D2, tuple(np.add(_unit(a), _unit(b))))] for a in range(3) for b in range(3)]
    zeta = [[(1.0, _D2, (0, 0, 1))], [(-1.0, _D2, (0, 1, 0))]]
    curl_zeta = [[(-1.0, _D2, (0, 2, 0)), (-1.0, _D2, (0, 0, 2))],
                 [(1.0, _D2, (1, 1, 0))], [(1.0, _D2, (1, 0, 1))]]
    r0, r1 = _sq_norm(r), _sq_norm(grad_r)
    u0, u1, u2 = _sq_norm(u), _sq_norm(grad_u), _sq_norm(hess_u)
    z0, zc = _sq_norm(zeta), _sq_norm(curl_zeta)
    return {
        "err_r_l2": math.sqrt(r0),
        "err_r_h1": math.sqrt(r0 + r1),
        "err_phi_l2": math.sqrt(u1),
        "err_phi_h1": math.sqrt(u1 + u2),
        "err_zeta_l2": math.sqrt(z0),
        "err_zeta_hcurl": math.sqrt(z0 + zc),
        "err_zeta_curl": math.sqrt(zc),
        "err_p_h1": 0.0,
        "err_u_h1": math.sqrt(u0 + u1),
    }
