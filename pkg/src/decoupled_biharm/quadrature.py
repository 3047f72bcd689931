"""Quadrature on tetrahedra.

Rules are tensor Gauss-Legendre rules pulled back through the collapsed
(Duffy) map of the unit cube onto the reference tetrahedron, so any degree
is available without coefficient tables.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np

__all__ = ["QuadRule", "tet_rule", "monomial_integral", "MAX_DEGREE"]

MAX_DEGREE = 30


@dataclass(frozen=True, eq=False)
class QuadRule:
    """Quadrature rule on the reference tetrahedron.

    ``points`` are barycentric 4-tuples, ``weights`` sum to the reference
    volume 1/6. Scale by ``6 * volume`` to integrate over a physical cell.
    """

    points: np.ndarray
    weights: np.ndarray
    target_degree: int

    def __len__(self) -> int:
        return len(self.weights)

    def integrate(self, values: np.ndarray, volume: float = 1.0 / 6.0) -> float:
        """Apply the rule to integrand samples at ``points``."""
        return float(6.0 * volume * np.dot(self.weights, values))


@lru_cache(maxsize=None)
def tet_rule(degree: int) -> QuadRule:
    """Rule exact for polynomials of total degree <= ``degree``."""
    if not isinstance(degree, (int, np.integer)) or not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree!r} (1..{MAX_DEGREE})")
    # the Duffy Jacobian adds up to 2 to the degree in the collapsed direction
    q = (int(degree) + 4) // 2
    t, w = np.polynomial.legendre.leggauss(q)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    a, b, c = np.meshgrid(t, t, t, indexing="ij")
    wa, wb, wc = np.meshgrid(w, w, w, indexing="ij")
    a, b, c = a.ravel(), b.ravel(), c.ravel()
    x = a
    y = b * (1.0 - a)
    z = c * (1.0 - a) * (1.0 - b)
    weights = (wa * wb * wc).ravel() * (1.0 - a) ** 2 * (1.0 - b)
    points = np.column_stack([1.0 - x - y - z, x, y, z])
    points.flags.writeable = False
    weights.flags.writeable = False
    return QuadRule(points=points, weights=weights, target_degree=int(degree))


def monomial_integral(alpha, volume: float = 1.0 / 6.0) -> float:
    """Exact integral of prod(lambda_i ** alpha_i) over a tet of the given volume."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != 4 or min(alpha) < 0:
        raise ValueError(f"expected four non-negative exponents, got {alpha}")
    num = 1
    for a in alpha:
        num *= factorial(a)
    return 6.0 * volume * num / factorial(sum(alpha) + 3)
