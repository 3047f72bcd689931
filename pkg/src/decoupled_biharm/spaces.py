"""Global DOF maps with homogeneous Dirichlet elimination."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .elements import Family, get_family
from .mesh import Mesh

__all__ = ["FESpace", "build_space", "gradient_inclusion"]


@dataclass(frozen=True, eq=False)
class FESpace:
    """Finite element space on a mesh.

    ``cell_dofs[c, l]`` is the free global DOF of local DOF ``l`` on cell ``c``
    or -1 when the DOF is eliminated by the boundary condition. Vector spaces
    use component-major numbering, both locally (``comp * nloc + b``) and
    globally (``comp * n_scalar + i``). ``cell_signs`` carries the Nedelec
    edge orientation and is all ones for scalar families.
    """

    mesh: Mesh
    family: object
    components: int
    cell_dofs: np.ndarray
    cell_signs: np.ndarray
    n_scalar: int
    dirichlet: bool
    entity_dofs: dict

    @property
    def ndofs(self) -> int:
        return self.n_scalar * self.components

    @property
    def nloc(self) -> int:
        return self.family.ndofs

    def cell_values(self, x: np.ndarray) -> np.ndarray:
        """Per-cell local coefficients (C, components, nloc), orientation applied."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.ndofs,):
            raise ValueError(f"coefficient vector has shape {x.shape}, expected ({self.ndofs},)")
        padded = np.append(x, 0.0)
        local = padded[self.cell_dofs].reshape(self.mesh.n_cells, self.components, self.nloc)
        return local * self.cell_signs[:, None, :]

    def scalar_dof_of_vertex(self) -> np.ndarray:
        """Free scalar DOF attached to each mesh vertex (-1 if eliminated)."""
        return self.entity_dofs["vertex"][:, 0]


def _number_entities(mesh: Mesh, fam, dirichlet: bool):
    layout = fam.dofs_per_entity
    kinds = [
        ("vertex", mesh.n_vertices, mesh.boundary_vertices),
        ("edge", mesh.n_edges, mesh.boundary_edges),
        ("face", mesh.n_faces, mesh.boundary_faces),
        ("cell", mesh.n_cells, np.zeros(mesh.n_cells, dtype=bool)),
    ]
    entity_dofs = {}
    nxt = 0
    for kind, count, on_boundary in kinds:
        per = layout[kind]
        ids = -np.ones((count, per), dtype=np.int64)
        free = np.ones(count, dtype=bool) if not dirichlet else ~on_boundary
        nfree = int(free.sum())
        ids[free] = nxt + np.arange(nfree * per).reshape(nfree, per)
        nxt += nfree * per
        entity_dofs[kind] = ids
    return entity_dofs, nxt


def build_space(mesh: Mesh, family, components: int = 1, dirichlet: bool = True) -> FESpace:
    """Build the global DOF map of ``family`` on ``mesh``.

    With ``dirichlet=True`` every DOF attached to a boundary vertex, edge or
    face is eliminated, which imposes homogeneous data exactly (H^1_0 for
    scalar families, vanishing tangential trace for Nedelec).
    """
    fam = get_family(family)
    if components not in (1, 3):
        raise ValueError("components must be 1 or 3")
    if fam.tag is Family.NED1 and components != 1:
        raise ValueError("Nedelec space is already vector valued")
    entity_dofs, n_scalar = _number_entities(mesh, fam, dirichlet)

    nc = mesh.n_cells
    local = np.empty((nc, fam.ndofs), dtype=np.int64)
    for l, (kind, k, v) in enumerate(fam.dof_entities):
        if kind == "vertex":
            local[:, l] = entity_dofs["vertex"][mesh.cells[:, k], 0]
        elif kind == "edge":
            local[:, l] = entity_dofs["edge"][mesh.cell_edges[:, k], 0]
        elif kind == "face":
            fids = mesh.cell_faces[:, k]
            if v < 0:
                local[:, l] = entity_dofs["face"][fids, 0]
            else:
                # select the slot of global vertex v within the sorted face triple
                gv = mesh.cells[:, v]
                slot = np.argmax(mesh.faces[fids] == gv[:, None], axis=1)
                local[:, l] = entity_dofs["face"][fids, slot]
        else:
            local[:, l] = entity_dofs["cell"][np.arange(nc), 0]

    if components == 3:
        cell_dofs = np.concatenate(
            [np.where(local >= 0, local + c * n_scalar, -1) for c in range(3)], axis=1
        )
    else:
        cell_dofs = local
    if fam.tag is Family.NED1:
        signs = mesh.cell_edge_signs.astype(float)
    else:
        signs = np.ones((nc, fam.ndofs))
    cell_dofs.flags.writeable = False
    signs.flags.writeable = False
    return FESpace(mesh, fam, components, cell_dofs, signs, n_scalar, dirichlet, entity_dofs)


def gradient_inclusion(scalar_space: FESpace, ned_space: FESpace) -> sp.csr_matrix:
    """Matrix G whose columns are gradients of P1 basis functions in Nedelec DOFs.

    The coefficient of ``grad s`` on edge (a, b), a < b, is ``s(b) - s(a)``.
    """
    if scalar_space.mesh is not ned_space.mesh:
        raise ValueError("spaces live on different meshes")
    if scalar_space.family.tag is not Family.P1 or scalar_space.components != 1:
        raise ValueError("gradient inclusion is defined for the scalar P1 space")
    if ned_space.family.tag is not Family.NED1:
        raise ValueError("target space must be Nedelec")
    mesh = ned_space.mesh
    edof = ned_space.entity_dofs["edge"][:, 0]
    vdof = scalar_space.entity_dofs["vertex"][:, 0]
    rows, cols, vals = [], [], []
    for end, sign in ((1, 1.0), (0, -1.0)):
        v = vdof[mesh.edges[:, end]]
        keep = (edof >= 0) & (v >= 0)
        rows.append(edof[keep])
        cols.append(v[keep])
        vals.append(np.full(int(keep.sum()), sign))
    G = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ned_space.ndofs, scalar_space.ndofs),
    ).tocsr()
    G.sort_indices()
    return G
