"""Structured tetrahedral meshes of the unit cube.

The cube is cut into ``n**3`` subcubes, each split into six tetrahedra that
share the subcube body diagonal (Kuhn triangulation). Edges and faces are
numbered lexicographically by their sorted vertex tuples so that every
downstream DOF map is reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

__all__ = [
    "Mesh",
    "CellGeometry",
    "MeshError",
    "LOCAL_EDGES",
    "LOCAL_FACES",
    "mesh_from_cells",
    "relabel_vertices",
    "build_box_mesh",
    "cell_geometry",
    "boundary_entities",
    "dump_mesh",
]

# local edge k joins local vertices LOCAL_EDGES[k]
LOCAL_EDGES = np.array([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
# local face i is opposite local vertex i
LOCAL_FACES = np.array([(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)])


class MeshError(ValueError):
    """Raised for invalid mesh parameters or degenerate cells."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Tetrahedral mesh with full entity incidence.

    Attributes
    ----------
    vertices : (V, 3) float array
    cells : (C, 4) int array, positively oriented
    edges : (E, 2) int array of sorted vertex pairs
    faces : (F, 3) int array of sorted vertex triples
    cell_edges, cell_edge_signs : (C, 6) arrays; sign is +1 when the local
        edge direction agrees with the global low->high direction
    cell_faces : (C, 4) int array, local face i opposite local vertex i
    face_cells : (F, 2) int array, second entry -1 on the boundary
    boundary_vertices, boundary_edges, boundary_faces : bool arrays
    n : subdivisions per axis
    """

    vertices: np.ndarray
    cells: np.ndarray
    edges: np.ndarray
    faces: np.ndarray
    cell_edges: np.ndarray
    cell_edge_signs: np.ndarray
    cell_faces: np.ndarray
    face_cells: np.ndarray
    boundary_vertices: np.ndarray
    boundary_edges: np.ndarray
    boundary_faces: np.ndarray
    n: int

    @property
    def h(self) -> float:
        """Longest edge length (the subcube body diagonal)."""
        return float(np.sqrt(3.0) / self.n)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def counts(self) -> dict:
        return {
            "V": self.n_vertices,
            "E": self.n_edges,
            "F": self.n_faces,
            "C": self.n_cells,
            "boundary_V": int(self.boundary_vertices.sum()),
            "boundary_E": int(self.boundary_edges.sum()),
            "boundary_F": int(self.boundary_faces.sum()),
            "interior_V": int((~self.boundary_vertices).sum()),
            "interior_E": int((~self.boundary_edges).sum()),
            "interior_F": int((~self.boundary_faces).sum()),
        }


@dataclass(frozen=True)
class CellGeometry:
    """Affine map data for a batch of cells.

    ``jacobian[c]`` has columns ``x_i - x_0``; ``grad_lambda[c, i]`` is the
    physical gradient of the i-th barycentric coordinate.
    """

    origin: np.ndarray
    jacobian: np.ndarray
    inv_transpose: np.ndarray
    volume: np.ndarray
    grad_lambda: np.ndarray

    def to_physical(self, bary: np.ndarray) -> np.ndarray:
        """Map barycentric points (Q, 4) to physical points (C, Q, 3)."""
        bary = np.asarray(bary, dtype=float)
        return self.origin[:, None, :] + np.einsum("cij,qj->cqi", self.jacobian, bary[:, 1:])


def _vertex_id(i, j, k, n):
    return (i * (n + 1) + j) * (n + 1) + k


def build_box_mesh(n: int) -> Mesh:
    """Kuhn triangulation of the unit cube with ``n`` subdivisions per axis."""
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise MeshError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    ticks = np.arange(n + 1)
    ii, jj, kk = np.meshgrid(ticks, ticks, ticks, indexing="ij")
    vertices = np.column_stack([ii.ravel(), jj.ravel(), kk.ravel()]) / n

    corners = np.array(
        [(i, j, k) for i in range(n) for j in range(n) for k in range(n)], dtype=np.int64
    ).reshape(-1, 3)
    unit = np.eye(3, dtype=np.int64)
    cells = []
    for perm in permutations(range(3)):
        path = [np.zeros(3, dtype=np.int64)]
        for axis in perm:
            path.append(path[-1] + unit[axis])
        ids = [
            _vertex_id(corners[:, 0] + p[0], corners[:, 1] + p[1], corners[:, 2] + p[2], n)
            for p in path
        ]
        cells.append(np.column_stack(ids))
    # cube-major ordering: all six tets of a subcube are contiguous
    cells = np.stack(cells, axis=1).reshape(-1, 4)

    # orient positively
    x = vertices[cells]
    det = np.linalg.det(np.stack([x[:, 1] - x[:, 0], x[:, 2] - x[:, 0], x[:, 3] - x[:, 0]], axis=-1))
    flip = det < 0
    cells[flip, 2], cells[flip, 3] = cells[flip, 3].copy(), cells[flip, 2].copy()

    return _with_topology(vertices, cells, n)


def mesh_from_cells(vertices, cells, n: int = 0) -> Mesh:
    """Mesh from raw vertex coordinates and positively oriented cells."""
    vertices = np.array(vertices, dtype=float).reshape(-1, 3)
    cells = np.array(cells, dtype=np.int64).reshape(-1, 4)
    if cells.size and (cells.min() < 0 or cells.max() >= len(vertices)):
        raise MeshError("cell references a missing vertex")
    return _with_topology(vertices, cells, n)


def relabel_vertices(mesh: Mesh, perm) -> Mesh:
    """Same geometry with vertex ``i`` renamed to ``perm[i]``.

    Edge/face numbering and orientation signs change accordingly.
    """
    perm = np.asarray(perm, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(mesh.n_vertices)):
        raise ValueError("perm must be a permutation of the vertex indices")
    vertices = np.empty_like(mesh.vertices)
    vertices[perm] = mesh.vertices
    return _with_topology(vertices, perm[mesh.cells], mesh.n)


def _with_topology(vertices: np.ndarray, cells: np.ndarray, n: int) -> Mesh:
    nc = len(cells)
    local_edges = cells[:, LOCAL_EDGES]  # (C, 6, 2)
    edge_keys = np.sort(local_edges, axis=2).reshape(-1, 2)
    edges, edge_inv = np.unique(edge_keys, axis=0, return_inverse=True)
    cell_edges = edge_inv.reshape(nc, 6)
    cell_edge_signs = np.where(local_edges[:, :, 0] < local_edges[:, :, 1], 1, -1)

    face_keys = np.sort(cells[:, LOCAL_FACES], axis=2).reshape(-1, 3)
    faces, face_inv = np.unique(face_keys, axis=0, return_inverse=True)
    cell_faces = face_inv.reshape(nc, 4)

    face_cells = -np.ones((len(faces), 2), dtype=np.int64)
    owner = np.repeat(np.arange(nc), 4)
    flat = cell_faces.ravel()
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=len(faces))
    if counts.max() > 2:
        raise MeshError("non-manifold face detected")
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    face_cells[:, 0] = owner[order[starts]]
    two = counts == 2
    face_cells[two, 1] = owner[order[starts[two] + 1]]

    boundary_faces = counts == 1
    boundary_edges = np.zeros(len(edges), dtype=bool)
    boundary_vertices = np.zeros(len(vertices), dtype=bool)
    bf = faces[boundary_faces]
    boundary_vertices[bf.ravel()] = True
    if len(bf):
        bf_edges = np.sort(bf[:, [[0, 1], [0, 2], [1, 2]]], axis=2).reshape(-1, 2)
        # edges are sorted lexicographically; locate via a combined key
        key = edges[:, 0] * len(vertices) + edges[:, 1]
        bkey = bf_edges[:, 0] * len(vertices) + bf_edges[:, 1]
        boundary_edges[np.searchsorted(key, bkey)] = True

    mesh = Mesh(
        vertices=vertices,
        cells=cells,
        edges=edges,
        faces=faces,
        cell_edges=cell_edges,
        cell_edge_signs=cell_edge_signs,
        cell_faces=cell_faces,
        face_cells=face_cells,
        boundary_vertices=boundary_vertices,
        boundary_edges=boundary_edges,
        boundary_faces=boundary_faces,
        n=n,
    )
    for arr in (vertices, cells, edges, faces, cell_edges, cell_edge_signs, cell_faces,
                face_cells, boundary_vertices, boundary_edges, boundary_faces):
        arr.flags.writeable = False
    # fail early on degenerate cells
    cell_geometry(mesh)
    return mesh


def cell_geometry(mesh: Mesh, cell=None) -> CellGeometry:
    """Affine map data for one cell, a selection of cells, or all cells.

    Returns batched arrays even when a single index is given.
    """
    if cell is None:
        cells = mesh.cells
    else:
        idx = np.atleast_1d(np.asarray(cell))
        if idx.size and (idx.min() < -mesh.n_cells or idx.max() >= mesh.n_cells):
            raise IndexError(f"cell index out of range for mesh with {mesh.n_cells} cells")
        cells = mesh.cells[idx]
    return geometry_from_points(mesh.vertices[cells])


def geometry_from_points(x: np.ndarray) -> CellGeometry:
    """Affine map data for tetrahedra given as (C, 4, 3) vertex coordinates."""
    x = np.asarray(x, dtype=float).reshape(-1, 4, 3)
    jac = np.stack([x[:, 1] - x[:, 0], x[:, 2] - x[:, 0], x[:, 3] - x[:, 0]], axis=-1)
    det = np.linalg.det(jac)
    if np.any(det <= 0.0):
        bad = int(np.argmax(det <= 0.0))
        raise MeshError(f"degenerate or inverted cell {bad} (det={det[bad]:.3e})")
    inv = np.linalg.inv(jac)
    grad = np.empty((len(x), 4, 3))
    grad[:, 1:] = inv  # rows of J^{-1} are the gradients of lambda_1..3
    grad[:, 0] = -inv.sum(axis=1)
    return CellGeometry(
        origin=x[:, 0].copy(),
        jacobian=jac,
        inv_transpose=np.transpose(inv, (0, 2, 1)),
        volume=det / 6.0,
        grad_lambda=grad,
    )


def boundary_entities(mesh: Mesh) -> dict:
    """Boundary flags for vertices, edges and faces."""
    return {
        "vertices": mesh.boundary_vertices,
        "edges": mesh.boundary_edges,
        "faces": mesh.boundary_faces,
    }


def dump_mesh(mesh: Mesh, stream) -> None:
    """Plain-text debug dump: counts line, vertex coordinates, cell tuples."""
    stream.write(f"{mesh.n_vertices} {mesh.n_edges} {mesh.n_faces} {mesh.n_cells}\n")
    for x in mesh.vertices:
        stream.write(f"{x[0]:.17g} {x[1]:.17g} {x[2]:.17g}\n")
    for c in mesh.cells:
        stream.write(f"{c[0]} {c[1]} {c[2]} {c[3]}\n")
