import numpy as np
import pytest
from conftest import galerkin_stiffness
from hypothesis import given, settings
from hypothesis import strategies as st

from llfvem import fvem
from llfvem.mesh import TriMesh, build_dual, build_rect_mesh


def _refined_subregion_mass(p, level=120):
    """Brute-force [l, j] = integral over {lambda_l is max} of lambda_j.

    Uniform refinement into level^2 sub-triangles; each is assigned to the
    subregion containing its centroid.  Accuracy is O(1/level) from the
    sub-triangles cut by dual segments.
    """
    e1, e2 = p[1] - p[0], p[2] - p[0]
    area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
    out = np.zeros((3, 3))
    small = area / level**2
    for i in range(level):
        for j in range(level - i):
            for up in (True, False):
                if up:
                    corners = np.array([(i, j), (i + 1, j), (i, j + 1)], float)
                elif i + j + 2 <= level:
                    corners = np.array([(i + 1, j), (i + 1, j + 1), (i, j + 1)], float)
                else:
                    continue
                a, b = corners.mean(axis=0) / level
                lam = np.array([1 - a - b, a, b])
                out[np.argmax(lam)] += small * lam
    return out


def test_local_mass_closed_form():
    mesh = build_rect_mesh(1, 1)
    dual = build_dual(mesh)
    s = dual.tri_area[0]
    expected = np.full((3, 3), 7 / 108 * s) + np.eye(3) * (11 / 54 - 7 / 108) * s
    np.testing.assert_allclose(fvem.local_mass(dual)[0], expected, rtol=1e-13)


def test_local_mass_against_refined_quadrature():
    p = np.array([[0.1, 0.2], [1.3, 0.4], [0.5, 1.7]])
    tri = TriMesh(p, np.array([[0, 1, 2]]), np.array([0, 1, 2]), 1.0, (0, 1, 0, 1))
    local = fvem.local_mass(build_dual(tri))[0]
    brute = _refined_subregion_mass(p)
    np.testing.assert_allclose(local, brute, rtol=2e-2)


def test_mass_rows_sum_to_control_volumes(unit8):
    _, dual = unit8
    M = fvem.assemble_mass(dual)
    np.testing.assert_allclose(np.asarray(M.sum(axis=1)).ravel(), dual.cv_area, rtol=1e-13)


def test_weighted_mass_scales_elements(unit8, rng):
    mesh, dual = unit8
    w = rng.uniform(0.5, 2.0, mesh.n_triangles)
    M = fvem.assemble_mass(dual, w)
    expected = np.bincount(mesh.triangles.ravel(), weights=np.repeat(w * dual.tri_area / 3, 3), minlength=mesh.n_nodes)
    np.testing.assert_allclose(np.asarray(M.sum(axis=1)).ravel(), expected, rtol=1e-13)


def test_lumped_mass_is_diagonal(unit8):
    _, dual = unit8
    np.testing.assert_array_equal(fvem.lumped_mass(dual).diagonal(), dual.cv_area)


@pytest.mark.parametrize("nx, ny", [(1, 1), (3, 5), (16, 16)])
def test_stiffness_equals_galerkin(nx, ny):
    mesh = build_rect_mesh(nx, ny, (0.0, 2.0, -1.0, 0.5))
    A = fvem.assemble_stiffness(build_dual(mesh)).toarray()
    K = galerkin_stiffness(mesh)
    assert np.abs(A - K).max() <= 1e-12 * np.abs(K).max()


def test_stiffness_annihilates_constants(unit8):
    _, dual = unit8
    A = fvem.assemble_stiffness(dual)
    assert np.abs(A @ np.ones(A.shape[0])).max() < 1e-12


def test_gradients_exact_for_affine_fields(unit8, rng):
    mesh, _ = unit8
    coef = rng.normal(size=(3, 3))
    u = coef[:, 0] + np.outer(mesh.nodes[:, 0], coef[:, 1]) + np.outer(mesh.nodes[:, 1], coef[:, 2])
    g = fvem.element_gradients(u, mesh)
    np.testing.assert_allclose(g, np.broadcast_to(coef[:, 1:], g.shape), atol=1e-12)


def test_two_gradient_formulas_agree(unit8, rng):
    mesh, dual = unit8
    u = rng.normal(size=(mesh.n_nodes, 3))
    a = fvem.element_gradients(u, mesh)
    b = fvem.shape_function_gradients(u, dual)
    assert np.abs(a - b).max() <= 1e-13 * np.abs(a).max()


def test_grad_linf_examples(unit8):
    mesh, _ = unit8
    assert fvem.grad_linf(np.ones((mesh.n_nodes, 3)), mesh) == 0.0
    u = np.zeros((mesh.n_nodes, 3))
    u[:, 0] = mesh.nodes[:, 0]
    assert fvem.grad_linf(u, mesh) == pytest.approx(1.0, rel=1e-12)


def test_seminorm_matches_galerkin_form(unit8, rng):
    mesh, dual = unit8
    u = rng.normal(size=(mesh.n_nodes, 3))
    K = galerkin_stiffness(mesh)
    expected = np.sqrt(np.einsum("ic,ij,jc->", u, K, u))
    assert fvem.discrete_h1_seminorm(u, mesh) == pytest.approx(expected, rel=1e-12)
    u[:] = 0
    u[:, 0] = mesh.nodes[:, 0]
    assert fvem.discrete_h1_seminorm(u, mesh) == pytest.approx(1.0, rel=1e-12)


def test_discrete_norm_equivalent_to_galerkin_h1(unit8, rng):
    mesh, dual = unit8
    M = fvem.assemble_mass(dual).toarray()
    Msym = 0.5 * (M + M.T)
    K = galerkin_stiffness(mesh)
    ratios = []
    for _ in range(50):
        u = rng.normal(size=(mesh.n_nodes, 3)) * rng.uniform(0.01, 10)
        galerkin = np.sqrt(np.einsum("ic,ij,jc->", u, Msym + K, u))
        ratios.append(fvem.discrete_h1_norm(u, dual) / galerkin)
    assert 0.5 < min(ratios) and max(ratios) < 2.0


def test_bh_is_skew(rng):
    for k in range(100):
        n = int(rng.integers(1, 12))
        mesh = build_rect_mesh(n, int(rng.integers(1, 12)), (0.0, rng.uniform(0.5, 3), 0.0, rng.uniform(0.5, 3)))
        dual = build_dual(mesh)
        phi = rng.normal(size=(mesh.n_nodes, 3))
        u = rng.normal(size=(mesh.n_nodes, 3))
        r = fvem.apply_bh(phi, u, dual)
        assert abs(np.sum(r * u)) <= 1e-12 * np.sum(u * u) * (1 + np.abs(phi).max())


def test_bh_matrix_matches_apply(unit8, rng):
    mesh, dual = unit8
    phi = rng.normal(size=(mesh.n_nodes, 3))
    u = rng.normal(size=(mesh.n_nodes, 3))
    B = fvem.assemble_bh_matrix(phi, dual)
    np.testing.assert_allclose((B @ u.ravel()).reshape(-1, 3), fvem.apply_bh(phi, u, dual), atol=1e-12)


def test_bh_of_constant_u_vanishes(unit8, rng):
    mesh, dual = unit8
    phi = rng.normal(size=(mesh.n_nodes, 3))
    u = np.broadcast_to(rng.normal(size=3), (mesh.n_nodes, 3))
    assert np.abs(fvem.apply_bh(phi, u, dual)).max() < 1e-12


def test_skew_helper(rng):
    v, w = rng.normal(size=(2, 5, 3))
    np.testing.assert_allclose(np.einsum("kij,kj->ki", fvem._skew(v), w), np.cross(v, w), atol=1e-15)


def test_nodal_rhs_and_validation(unit8):
    mesh, dual = unit8
    f = np.ones(mesh.n_nodes)
    np.testing.assert_array_equal(fvem.nodal_rhs(f, dual), dual.cv_area)
    assert fvem.nodal_rhs(np.ones((mesh.n_nodes, 3)), dual).shape == (mesh.n_nodes, 3)
    with pytest.raises(ValueError):
        fvem.nodal_rhs(np.ones(3), dual)
    with pytest.raises(ValueError, match="nodal field"):
        fvem.apply_bh(np.ones((2, 3)), np.ones((2, 3)), dual)


def test_error_norms(unit8):
    mesh, dual = unit8
    u = fvem.sample(lambda x, y: np.stack([np.sin(x), y, 0 * x], axis=-1), mesh)
    assert fvem.error_norms(u, u, dual) == (0.0, 0.0, 0.0)
    c = np.array([0.3, -0.4, 0.0])
    linf, l2, h1 = fvem.error_norms(u + c, u, dual)
    assert linf == pytest.approx(0.5)
    assert l2 == pytest.approx(0.5 * np.sqrt(mesh.area), rel=1e-13)
    assert h1 == pytest.approx(l2, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 64), m=st.integers(1, 64), seed=st.integers(0, 2**31))
def test_stiffness_identity_random_meshes(n, m, seed):
    rng = np.random.default_rng(seed)
    w, h = rng.uniform(0.2, 5.0, 2)
    mesh = build_rect_mesh(n, m, (0.0, w, 0.0, h))
    A = fvem.assemble_stiffness(build_dual(mesh))
    u = rng.normal(size=mesh.n_nodes)
    field = np.zeros((mesh.n_nodes, 3))
    field[:, 0] = u
    assert u @ (A @ u) == pytest.approx(fvem.discrete_h1_seminorm(field, mesh) ** 2, rel=1e-11)
