import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sincfem.fem import (assemble, assemble_elementwise, build_mesh, l2_error_norm,
                         load_vector_from_function, project_onto_Vh)
from sincfem.linalg import generalized_eig_dense


@pytest.mark.parametrize("dim,n,N_h", [
    (1, 128, 127), (1, 256, 255), (1, 512, 511), (1, 1024, 1023),
    (2, 32, 961), (2, 64, 3969), (2, 128, 16129), (2, 256, 65025),
    (3, 10, 729), (3, 20, 6859), (3, 40, 59319),
])
def test_node_counts_table(dim, n, N_h):
    mesh = build_mesh(dim, n)
    assert mesh.N_h == N_h
    assert mesh.h == pytest.approx(math.sqrt(dim) / n)


def test_mesh_errors():
    for dim, n in [(0, 4), (4, 4), (2, 1)]:
        with pytest.raises(ValueError):
            build_mesh(dim, n)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(2, 9), st.data())
def test_multi_index_bijection(dim, n, data):
    mesh = build_mesh(dim, n)
    idx = data.draw(st.integers(0, mesh.N_h - 1))
    multi = mesh.multi_index(idx)
    assert all(1 <= i <= n - 1 for i in multi)
    assert mesh.node_index(multi) == idx
    np.testing.assert_array_equal(mesh.node_coord(idx), np.array(multi) / n)
    np.testing.assert_array_equal(mesh.coords()[idx], mesh.node_coord(idx))


def test_h_decreasing():
    hs = [build_mesh(2, n).h for n in range(2, 20)]
    assert all(b < a for a, b in zip(hs, hs[1:]))


def test_1d_matrices_n4():
    fem = assemble(build_mesh(1, 4), 0.0)
    h = 0.25
    tri = lambda a, b: np.diag([b] * 3) + np.diag([a] * 2, 1) + np.diag([a] * 2, -1)
    np.testing.assert_allclose(fem.mass.toarray(), h / 6 * tri(1, 4), atol=1e-15)
    np.testing.assert_allclose(fem.stiffness_laplace.toarray(), tri(-1, 2) / h, atol=1e-14)


def test_2d_single_interior_node():
    fem = assemble(build_mesh(2, 2), 1.0)
    assert fem.mass.shape == (1, 1)
    assert fem.mass[0, 0] == pytest.approx((4 * 0.5 / 6) ** 2)


@pytest.mark.parametrize("dim", [1, 2, 3])
@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_kronecker_matches_elementwise(dim, n):
    mesh = build_mesh(dim, n)
    a, b = assemble(mesh, 0.7), assemble_elementwise(mesh, 0.7)
    for X, Y in [(a.mass, b.mass), (a.stiffness_laplace, b.stiffness_laplace),
                 (a.operator_matrix, b.operator_matrix)]:
        assert np.max(np.abs((X - Y).toarray())) <= 1e-13 * np.max(np.abs(X.data))


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_symmetry_and_definiteness(dim):
    fem = assemble(build_mesh(dim, 5), 0.5)
    for X in (fem.mass, fem.stiffness_laplace, fem.operator_matrix):
        assert abs(X - X.T).max() == 0
        assert np.linalg.eigvalsh(X.toarray()).min() > 0


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_stiffness_row_sums_vanish_on_interior_patches(dim):
    mesh = build_mesh(dim, 6)
    K = assemble(mesh, 0.0).stiffness_laplace
    sums = K.sum(axis=1)
    for idx in range(mesh.N_h):
        if all(2 <= i <= mesh.n - 2 for i in mesh.multi_index(idx)):
            assert abs(sums[idx]) < 1e-12


def test_rayleigh_quotient_of_sine_interpolant():
    kappa = 0.5
    mesh = build_mesh(1, 16)
    fem = assemble(mesh, kappa)
    v = np.sin(np.pi * mesh.axis_nodes)
    rq = v @ (fem.operator_matrix @ v) / (v @ (fem.mass @ v))
    assert kappa ** 2 + np.pi ** 2 <= rq


def test_discrete_eigenvalue_upper_bound_constant():
    # lam_j <= lam_jh <= lam_j + C1 h^2 lam_j^2 with C1 bounded across meshes
    kappa = 0.5
    constants = []
    for n in (8, 16, 32):
        mesh = build_mesh(1, n)
        fem = assemble(mesh, kappa)
        lam_h = generalized_eig_dense(fem.operator_matrix, fem.mass).eigenvalues
        lam = kappa ** 2 + np.pi ** 2 * np.arange(1, n) ** 2
        assert np.all(lam <= lam_h * (1 + 1e-12))
        constants.append(np.max((lam_h - lam) / (mesh.h ** 2 * lam ** 2)))
    assert max(constants) < 1.0
    assert max(constants) / min(constants) < 1.5


def test_load_vector_constant_and_linear():
    mesh = build_mesh(1, 4)
    np.testing.assert_array_equal(load_vector_from_function(mesh, lambda x: np.zeros(len(x))), 0)
    np.testing.assert_allclose(load_vector_from_function(mesh, lambda x: np.ones(len(x))), [0.25] * 3,
                               atol=1e-15)
    np.testing.assert_allclose(load_vector_from_function(mesh, lambda x: x[:, 0]),
                               mesh.axis_nodes * 0.25, atol=1e-15)


def test_load_vector_polynomial_exactness_2d():
    # x^8 times a hat is degree 9 per axis, the exactness limit of 5-point Gauss;
    # hats are products of 1D hats, so the load is a product of 1D moments
    mesh = build_mesh(2, 5)
    b = load_vector_from_function(mesh, lambda p: p[:, 0] ** 8 * p[:, 1] ** 2)

    def hat_moment(k, xi, h):
        # int x^k phi(x) dx over [xi-h, xi+h], exact via antiderivatives
        F = lambda a, b, c: ((b ** (k + 2) - a ** (k + 2)) / (k + 2) - c * (b ** (k + 1) - a ** (k + 1)) / (k + 1))
        left = F(xi - h, xi, xi - h) / h
        right = -F(xi, xi + h, xi + h) / h
        return left + right

    h = 1 / 5
    expected = [hat_moment(8, x[0], h) * hat_moment(2, x[1], h) for x in mesh.coords()]
    np.testing.assert_allclose(b, expected, rtol=1e-12, atol=1e-16)


def test_projection_cases():
    mesh = build_mesh(2, 6)
    fem = assemble(mesh, 0.5)
    c = np.random.default_rng(0).standard_normal(mesh.N_h)
    np.testing.assert_allclose(project_onto_Vh(mesh, fem, fem.mass @ c), c, atol=1e-10)
    assert np.array_equal(project_onto_Vh(mesh, fem, np.zeros(mesh.N_h)), np.zeros(mesh.N_h))


def test_projection_of_constant_1d():
    mesh = build_mesh(1, 4)
    fem = assemble(mesh, 0.0)
    load = load_vector_from_function(mesh, lambda x: np.ones(len(x)))
    ref = np.linalg.solve(fem.mass.toarray(), np.full(3, 0.25))
    np.testing.assert_allclose(project_onto_Vh(mesh, fem, load), ref, atol=1e-12)


def test_l2_error_norm():
    fem = assemble(build_mesh(1, 4), 0.0)
    assert l2_error_norm(fem, np.zeros(3)) == 0
    assert l2_error_norm(fem, [1, 0, 0]) == pytest.approx(math.sqrt(1 / 6), abs=1e-15)
    v = np.array([0.3, -1.0, 2.0])
    assert l2_error_norm(fem, -3 * v) == pytest.approx(3 * l2_error_norm(fem, v))
    with pytest.raises(ValueError):
        l2_error_norm(fem, np.ones(4))
