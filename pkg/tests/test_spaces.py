import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from decoupled_biharm.assembly import FormKind, assemble_bilinear
from decoupled_biharm.elements import Family
from decoupled_biharm.mesh import build_box_mesh
from decoupled_biharm.spaces import build_space, gradient_inclusion


def _free_dim(mesh, fam):
    iv = int((~mesh.boundary_vertices).sum())
    ie = int((~mesh.boundary_edges).sum())
    if_ = int((~mesh.boundary_faces).sum())
    nc = mesh.n_cells
    return {Family.P1: iv, Family.P2: iv + ie, Family.EP1: iv + if_,
            Family.EP2: iv + ie + 3 * if_ + nc, Family.NED1: ie}[fam]


@pytest.mark.parametrize("n,dims", [(1, (0, 1, 6, 25, 1)), (2, (1, 27, 73, 291, 26)),
                                    (3, (8, 125, 278, 1097, 117))])
def test_free_dims(n, dims):
    mesh = build_box_mesh(n)
    fams = (Family.P1, Family.P2, Family.EP1, Family.EP2, Family.NED1)
    got = tuple(build_space(mesh, f).ndofs for f in fams)
    assert got == dims
    assert got == tuple(_free_dim(mesh, f) for f in fams)


def test_vector_space_numbering_is_component_major():
    mesh = build_box_mesh(2)
    s = build_space(mesh, Family.EP1)
    v = build_space(mesh, Family.EP1, components=3)
    assert v.ndofs == 3 * s.ndofs
    for comp in range(3):
        block = v.cell_dofs[:, comp * s.nloc:(comp + 1) * s.nloc]
        expected = np.where(s.cell_dofs >= 0, s.cell_dofs + comp * s.ndofs, -1)
        assert np.array_equal(block, expected)


@pytest.mark.parametrize("fam", [Family.P1, Family.P2, Family.EP1, Family.EP2])
def test_boundary_dofs_eliminated(fam):
    mesh = build_box_mesh(2)
    sp_ = build_space(mesh, fam)
    for kind, flags in (("vertex", mesh.boundary_vertices), ("edge", mesh.boundary_edges),
                        ("face", mesh.boundary_faces)):
        if kind in sp_.entity_dofs and sp_.entity_dofs[kind].shape[1]:
            ent = sp_.entity_dofs[kind]
            assert np.all(ent[flags] == -1)
            assert np.all(ent[~flags] >= 0)


def test_nedelec_constrains_boundary_edges():
    mesh = build_box_mesh(2)
    N = build_space(mesh, Family.NED1)
    ed = N.entity_dofs["edge"][:, 0]
    assert np.array_equal(ed < 0, mesh.boundary_edges)


@pytest.mark.parametrize("fam", [Family.P2, Family.EP2, Family.NED1])
def test_conformity_on_shared_entities(fam):
    # cells sharing an edge reference the same global DOF with a consistent sign
    mesh = build_box_mesh(2)
    sp_ = build_space(mesh, fam, dirichlet=False)
    nv = 4 if fam is not Family.NED1 else 0
    owner = {}
    for c in range(mesh.n_cells):
        for k in range(6):
            e = mesh.cell_edges[c, k]
            dof = sp_.cell_dofs[c, nv + k]
            sign = sp_.cell_signs[c, nv + k] * (mesh.cell_edge_signs[c, k]
                                                if fam is Family.NED1 else 1)
            assert owner.setdefault(e, (dof, sign)) == (dof, sign)


def test_gradient_inclusion_shape_n2():
    mesh = build_box_mesh(2)
    G = gradient_inclusion(build_space(mesh, Family.P1), build_space(mesh, Family.NED1))
    assert G.shape == (26, 1)
    # the interior vertex touches 14 edges in the Kuhn lattice
    assert G.nnz == 14


def test_gradient_inclusion_rejects_wrong_spaces():
    mesh = build_box_mesh(1)
    with pytest.raises(ValueError):
        gradient_inclusion(build_space(mesh, Family.P2), build_space(mesh, Family.NED1))
    with pytest.raises(ValueError):
        gradient_inclusion(build_space(mesh, Family.P1), build_space(mesh, Family.P1))


def test_curl_of_discrete_gradients_each_basis():
    mesh = build_box_mesh(2)
    P1, N = build_space(mesh, Family.P1), build_space(mesh, Family.NED1)
    K = assemble_bilinear(FormKind.NED_CURL_CURL, N, N)
    G = gradient_inclusion(P1, N)
    assert np.max(np.abs((K @ G).toarray())) <= 1e-13


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_discrete_exactness_random(seed):
    mesh = build_box_mesh(3)
    P1, N = build_space(mesh, Family.P1), build_space(mesh, Family.NED1)
    V = build_space(mesh, Family.EP1, components=3)
    C = assemble_bilinear(FormKind.CURL_CURL_MIXED, N, V)
    G = gradient_inclusion(P1, N)
    s = np.random.default_rng(seed).standard_normal(P1.ndofs)
    assert np.max(np.abs(C @ (G @ s))) <= 1e-13 * np.max(np.abs(s))


def test_cell_values_shape_and_validation():
    mesh = build_box_mesh(1)
    V = build_space(mesh, Family.EP1, components=3)
    assert V.cell_values(np.ones(V.ndofs)).shape == (6, 3, 8)
    with pytest.raises(ValueError):
        V.cell_values(np.ones(V.ndofs + 1))
