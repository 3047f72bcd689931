"""Reference shape functions on tetrahedra.

Scalar families are polynomials in the barycentric coordinates and are
stored as sparse monomial expansions, so values and barycentric derivatives
come from one generic evaluator. Physical gradients follow from the chain
rule with the cell's barycentric gradients.

Local DOF order is always: vertices, edges (``LOCAL_EDGES`` order), faces
(face i opposite vertex i), cell interior.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .mesh import LOCAL_EDGES, LOCAL_FACES, CellGeometry

__all__ = [
    "Family",
    "ElementFamily",
    "get_family",
    "tabulate",
    "eval_lagrange",
    "eval_enriched",
    "eval_scalar",
    "eval_nedelec",
    "nedelec_curls",
]


class Family(str, Enum):
    P1 = "LagrangeP1"
    P2 = "LagrangeP2"
    EP1 = "EnrichedP1"
    EP2 = "EnrichedP2"
    NED1 = "NedelecFirstKind1"


# A monomial is (coefficient, exponent 4-tuple).
Poly = list


def _mono(*idx, coef=1.0):
    e = [0, 0, 0, 0]
    for i in idx:
        e[i] += 1
    return (coef, tuple(e))


@dataclass(frozen=True, eq=False)
class ElementFamily:
    """A finite element family on the reference tetrahedron.

    ``dof_entities[k] = (kind, local_entity, local_vertex)`` where kind is one
    of ``"vertex" | "edge" | "face" | "cell"`` and ``local_vertex`` (face
    DOFs of EnrichedP2 only) is the vertex selecting the face-bubble factor;
    it is -1 otherwise.
    """

    tag: Family
    degree: int
    dofs_per_entity: dict
    dof_entities: tuple
    basis: tuple = field(repr=False, default=())

    @property
    def ndofs(self) -> int:
        return len(self.dof_entities)

    @property
    def is_vector(self) -> bool:
        return self.tag is Family.NED1


def _lagrange_p1():
    basis = [[_mono(i)] for i in range(4)]
    ents = [("vertex", i, -1) for i in range(4)]
    return basis, ents


def _lagrange_p2():
    basis = [[_mono(i, i, coef=2.0), _mono(i, coef=-1.0)] for i in range(4)]
    basis += [[_mono(i, j, coef=4.0)] for i, j in LOCAL_EDGES]
    ents = [("vertex", i, -1) for i in range(4)] + [("edge", k, -1) for k in range(6)]
    return basis, ents


def _face_bubble(i):
    """q_i: product of the three barycentrics other than lambda_i."""
    return [j for j in range(4) if j != i]


def _enriched_p1():
    basis, ents = _lagrange_p1()
    basis += [[_mono(*_face_bubble(i))] for i in range(4)]
    ents += [("face", i, -1) for i in range(4)]
    return basis, ents


def _enriched_p2():
    basis, ents = _lagrange_p2()
    for i in range(4):
        for j in LOCAL_FACES[i]:
            basis.append([_mono(j, *_face_bubble(i))])
            ents.append(("face", i, int(j)))
    basis.append([_mono(0, 1, 2, 3)])
    ents.append(("cell", 0, -1))
    return basis, ents


def _make(tag):
    if tag is Family.P1:
        basis, ents = _lagrange_p1()
        return ElementFamily(tag, 1, {"vertex": 1, "edge": 0, "face": 0, "cell": 0},
                             tuple(ents), tuple(basis))
    if tag is Family.P2:
        basis, ents = _lagrange_p2()
        return ElementFamily(tag, 2, {"vertex": 1, "edge": 1, "face": 0, "cell": 0},
                             tuple(ents), tuple(basis))
    if tag is Family.EP1:
        basis, ents = _enriched_p1()
        return ElementFamily(tag, 3, {"vertex": 1, "edge": 0, "face": 1, "cell": 0},
                             tuple(ents), tuple(basis))
    if tag is Family.EP2:
        basis, ents = _enriched_p2()
        return ElementFamily(tag, 4, {"vertex": 1, "edge": 1, "face": 3, "cell": 1},
                             tuple(ents), tuple(basis))
    if tag is Family.NED1:
        ents = [("edge", k, -1) for k in range(6)]
        return ElementFamily(tag, 1, {"vertex": 0, "edge": 1, "face": 0, "cell": 0},
                             tuple(ents))
    raise ValueError(f"unknown element family {tag!r}")


_FAMILIES = {tag: _make(tag) for tag in Family}
_ALIASES = {
    "p1": Family.P1, "p2": Family.P2,
    "ep1": Family.EP1, "ep2": Family.EP2,
    "enriched1": Family.EP1, "enriched2": Family.EP2,
    "ned1": Family.NED1, "nedelec": Family.NED1,
}


def get_family(tag) -> ElementFamily:
    """Look up a family by enum member, enum value, or short alias."""
    if isinstance(tag, ElementFamily):
        return tag
    if isinstance(tag, str) and tag.lower() in _ALIASES:
        tag = _ALIASES[tag.lower()]
    try:
        return _FAMILIES[Family(tag)]
    except ValueError:
        raise ValueError(f"unknown element family {tag!r}") from None


def tabulate(family, bary) -> tuple[np.ndarray, np.ndarray]:
    """Values (Q, nb) and barycentric derivatives (Q, nb, 4) of a scalar family."""
    fam = get_family(family)
    if fam.is_vector:
        raise ValueError("tabulate handles scalar families only")
    lam = np.atleast_2d(np.asarray(bary, dtype=float))
    nq = len(lam)
    vals = np.zeros((nq, fam.ndofs))
    dlam = np.zeros((nq, fam.ndofs, 4))
    for b, poly in enumerate(fam.basis):
        for coef, e in poly:
            e = np.array(e)
            vals[:, b] += coef * np.prod(lam ** e, axis=1)
            for j in range(4):
                if e[j] == 0:
                    continue
                ej = e.copy()
                ej[j] -= 1
                dlam[:, b, j] += coef * e[j] * np.prod(lam ** ej, axis=1)
    return vals, dlam


def eval_scalar(family, bary, geom: CellGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Values (Q, nb) and physical gradients (C, Q, nb, 3)."""
    vals, dlam = tabulate(family, bary)
    grads = np.einsum("qbj,cjk->cqbk", dlam, geom.grad_lambda)
    return vals, grads


def eval_lagrange(family, bary, geom: CellGeometry):
    """Nodal Lagrange basis (P1 or P2): values and physical gradients."""
    fam = get_family(family)
    if fam.tag not in (Family.P1, Family.P2):
        raise ValueError(f"{fam.tag.value} is not a Lagrange family")
    return eval_scalar(fam, bary, geom)


def eval_enriched(family, bary, geom: CellGeometry):
    """Bubble-enriched basis (EnrichedP1 or EnrichedP2): values and gradients."""
    fam = get_family(family)
    if fam.tag not in (Family.EP1, Family.EP2):
        raise ValueError(f"{fam.tag.value} is not an enriched family")
    return eval_scalar(fam, bary, geom)


def eval_nedelec(bary, geom: CellGeometry, signs=None) -> tuple[np.ndarray, np.ndarray]:
    """Lowest-order first-kind Nedelec basis.

    Returns values (C, Q, 6, 3) and curls (C, 6, 3). ``signs`` (C, 6) flips
    local edges whose direction disagrees with the global one.
    """
    lam = np.atleast_2d(np.asarray(bary, dtype=float))
    g = geom.grad_lambda
    a, b = LOCAL_EDGES[:, 0], LOCAL_EDGES[:, 1]
    vals = (lam[None, :, a, None] * g[:, None, b, :]
            - lam[None, :, b, None] * g[:, None, a, :])
    curls = nedelec_curls(geom, signs)
    if signs is not None:
        vals = vals * np.asarray(signs)[:, None, :, None]
    return vals, curls


def nedelec_curls(geom: CellGeometry, signs=None) -> np.ndarray:
    """Cellwise-constant curls 2 grad(lambda_a) x grad(lambda_b), shape (C, 6, 3)."""
    g = geom.grad_lambda
    curls = 2.0 * np.cross(g[:, LOCAL_EDGES[:, 0]], g[:, LOCAL_EDGES[:, 1]])
    if signs is not None:
        curls = curls * np.asarray(signs)[:, :, None]
    return curls
