import numpy as np
import pytest
import scipy.io
from hypothesis import given, settings, strategies as st

from decoupled_biharm.assembly import (FormKind, assemble_bilinear, assemble_linear,
                                       export_matrix_market, field_at_points)
from decoupled_biharm.elements import Family, tabulate
from decoupled_biharm.mesh import build_box_mesh, cell_geometry, mesh_from_cells
from decoupled_biharm.mms import mms_case
from decoupled_biharm.quadrature import tet_rule
from decoupled_biharm.spaces import build_space, gradient_inclusion

REF = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])


@pytest.fixture(scope="module")
def one_tet():
    return mesh_from_cells(REF, [[0, 1, 2, 3]])


@pytest.fixture(scope="module")
def n2_spaces():
    mesh = build_box_mesh(2)
    return {
        "P1": build_space(mesh, Family.P1),
        "P2": build_space(mesh, Family.P2),
        "V": build_space(mesh, Family.EP1, components=3),
        "V2": build_space(mesh, Family.EP2, components=3),
        "N": build_space(mesh, Family.NED1),
    }


def test_gradgrad_reference(one_tet):
    S = build_space(one_tet, Family.P1, dirichlet=False)
    K = assemble_bilinear(FormKind.GRAD_GRAD, S, S).toarray()
    assert abs(K[1, 1] - 1.0 / 6.0) <= 1e-14
    assert abs(K[0, 0] - 0.5) <= 1e-14
    assert np.max(np.abs(K.sum(axis=1))) <= 1e-14


def test_divdiv_kills_constant_field(one_tet):
    V = build_space(one_tet, Family.EP1, components=3, dirichlet=False)
    D = assemble_bilinear(FormKind.DIV_DIV, V, V, alpha=1.0)
    x = np.zeros(V.ndofs)
    x[:4] = 1.0  # vertex DOFs of the first component: phi = (1, 0, 0)
    assert np.max(np.abs(D @ x)) <= 1e-14


def test_mixed_curl_of_gradient(n2_spaces):
    C = assemble_bilinear(FormKind.CURL_CURL_MIXED, n2_spaces["N"], n2_spaces["V"])
    G = gradient_inclusion(n2_spaces["P1"], n2_spaces["N"])
    assert np.max(np.abs(C @ G.toarray())) <= 1e-13


def test_load_constant_reference(one_tet):
    S = build_space(one_tet, Family.P1, dirichlet=False)
    b = assemble_linear(S, lambda p: np.ones(p.shape[:-1]), tet_rule(2))
    assert np.allclose(b, 1.0 / 24.0, atol=1e-16)
    assert np.all(assemble_linear(S, lambda p: np.zeros(p.shape[:-1]), tet_rule(2)) == 0.0)


def test_load_matches_bruteforce(n2_spaces):
    V = n2_spaces["V"]
    f2 = mms_case("poly").f2
    b = assemble_linear(V, f2, tet_rule(14))
    # independent per-cell loop with a different exact rule
    rule = tet_rule(20)
    vals, _ = tabulate(Family.EP1, rule.points)
    ref = np.zeros(V.ndofs)
    mesh = V.mesh
    for c in range(mesh.n_cells):
        g = cell_geometry(mesh, c)
        pts = g.to_physical(rule.points)[0]
        fx = f2(pts)
        for comp in range(3):
            for loc in range(8):
                dof = V.cell_dofs[c, comp * 8 + loc]
                if dof >= 0:
                    ref[dof] += 6 * g.volume[0] * np.sum(rule.weights * vals[:, loc] * fx[:, comp])
    assert np.max(np.abs(b - ref)) <= 1e-13 * max(1.0, np.max(np.abs(ref)))


SYMMETRIC = [(FormKind.GRAD_GRAD, "P1"), (FormKind.GRAD_GRAD, "P2"), (FormKind.DIV_DIV, "V"),
             (FormKind.CURL_CURL_VEC, "V"), (FormKind.NED_CURL_CURL, "N"),
             (FormKind.NED_MASS, "N"), (FormKind.VEC_H1_NORM, "V"), (FormKind.MASS, "P2"),
             (FormKind.DIV_DIV, "V2")]


@pytest.mark.parametrize("kind,space", SYMMETRIC)
def test_symmetry_and_semidefinite(kind, space, n2_spaces):
    S = n2_spaces[space]
    A = assemble_bilinear(kind, S, S)
    assert abs(A - A.T).max() <= 1e-14 if A.nnz else True
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.standard_normal(S.ndofs)
        assert x @ (A @ x) >= -1e-12 * (x @ x)


def test_csr_sorted_unique(n2_spaces):
    A = assemble_bilinear(FormKind.VEC_H1_NORM, n2_spaces["V"], n2_spaces["V"])
    assert A.has_sorted_indices and A.has_canonical_format


def test_kernel_dims_single_tet(one_tet):
    S = build_space(one_tet, Family.P1, dirichlet=False)
    N = build_space(one_tet, Family.NED1, dirichlet=False)
    K = assemble_bilinear(FormKind.GRAD_GRAD, S, S).toarray()
    Kc = assemble_bilinear(FormKind.NED_CURL_CURL, N, N).toarray()
    ev = np.linalg.eigvalsh(K)
    evc = np.linalg.eigvalsh(Kc)
    assert np.sum(np.abs(ev) < 1e-12) == 1
    assert np.sum(np.abs(evc) < 1e-12) == 3


def test_linear_function_energy():
    mesh = build_box_mesh(2)
    S = build_space(mesh, Family.P1, dirichlet=False)
    K = assemble_bilinear(FormKind.GRAD_GRAD, S, S)
    a = np.array([0.3, -1.2, 2.0])
    x = mesh.vertices @ a + 0.7
    assert abs(x @ (K @ x) - a @ a) <= 1e-13 * (a @ a)


def test_alpha_only_for_divdiv(n2_spaces):
    with pytest.raises(ValueError):
        assemble_bilinear(FormKind.GRAD_GRAD, n2_spaces["P1"], n2_spaces["P1"], alpha=2.0)
    with pytest.raises(ValueError):
        assemble_bilinear(FormKind.GRAD_GRAD, n2_spaces["V"], n2_spaces["V"])


def test_variable_alpha_between_bounds(n2_spaces):
    V = n2_spaces["V"]
    D1 = assemble_bilinear(FormKind.DIV_DIV, V, V)
    Da = assemble_bilinear(FormKind.DIV_DIV, V, V, alpha=lambda p: 1 + 0.5 * p[..., 0],
                           quad=tet_rule(5))
    x = np.random.default_rng(2).standard_normal(V.ndofs)
    e1, ea = x @ (D1 @ x), x @ (Da @ x)
    assert e1 <= ea <= 1.5 * e1


def test_nedgradscalar_is_mass_times_inclusion(n2_spaces):
    P1, N = n2_spaces["P1"], n2_spaces["N"]
    Gp = assemble_bilinear(FormKind.NED_GRAD_SCALAR, P1, N)
    M = assemble_bilinear(FormKind.NED_MASS, N, N)
    G = gradient_inclusion(P1, N)
    assert abs(Gp - M @ G).max() <= 1e-14


def test_vecgradscalar_against_load(n2_spaces):
    # (phi, grad s) for the interpolated constant field equals the grad-mode load
    V, P2 = n2_spaces["V"], n2_spaces["P2"]
    B = assemble_bilinear(FormKind.VEC_GRAD_SCALAR, V, P2)
    rng = np.random.default_rng(4)
    x = rng.standard_normal(V.ndofs)
    rule = tet_rule(8)
    vals = field_at_points(V, x, rule, "val")
    assert np.allclose(B @ x, assemble_linear(P2, vals, rule, mode="grad"), atol=1e-14)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_field_norm_matches_mass_matrix(seed):
    mesh = build_box_mesh(2)
    N = build_space(mesh, Family.NED1)
    M = assemble_bilinear(FormKind.NED_MASS, N, N)
    x = np.random.default_rng(seed).standard_normal(N.ndofs)
    rule = tet_rule(2)
    v = field_at_points(N, x, rule, "val")
    w = np.outer(6 * cell_geometry(mesh).volume, rule.weights)
    assert abs(np.sum(w * (v ** 2).sum(-1)) - x @ (M @ x)) <= 1e-12 * (x @ (M @ x))


def test_export_matrix_market(tmp_path, n2_spaces):
    A = assemble_bilinear(FormKind.GRAD_GRAD, n2_spaces["P2"], n2_spaces["P2"])
    path = tmp_path / "k.mtx"
    export_matrix_market(A, path)
    B = scipy.io.mmread(str(path))
    assert abs(B - A).max() <= 1e-15
