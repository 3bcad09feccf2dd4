import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrvem.polybasis import (VectorBasis, build_rm_perp, derivative_matrices, edge_coordinate,
                             edge_monomials, evaluate, l2_project_Pk, mass_matrix, monomial_exponents,
                             monomials, n_monomials, rm_perp_dim, strain_of, vector_poly_basis)
from hrvem.quadrature import polygon_rule


@pytest.mark.parametrize("k,dim", [(1, 3), (2, 9), (3, 17), (4, 27)])
def test_rm_perp_dimension(k, dim):
    # dim P_k^2 minus the three rigid motions
    assert rm_perp_dim(k) == dim == 2 * n_monomials(k) - 3


def test_monomial_ordering():
    assert monomial_exponents(2).tolist() == [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]]


def test_monomials_are_scaled():
    m = monomials(2, np.array([[3.0, 5.0]]), np.array([1.0, 1.0]), 2.0)
    np.testing.assert_allclose(m[0], [1, 1, 2, 1, 2, 4])


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 5), st.floats(0.1, 3.0), st.integers(0, 10_000))
def test_derivatives_match_finite_differences(d, h, seed):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(n_monomials(d))
    center = rng.standard_normal(2)
    x = center + rng.standard_normal((4, 2)) * h
    dx, dy = derivative_matrices(d, h)
    eps = 1e-6 * h

    def p(pts):
        return monomials(d, pts, center, h) @ c

    fd_x = (p(x + [eps, 0]) - p(x - [eps, 0])) / (2 * eps)
    fd_y = (p(x + [0, eps]) - p(x - [0, eps])) / (2 * eps)
    low = monomials(d - 1, x, center, h)
    scale = 1 + np.abs(fd_x).max() + np.abs(fd_y).max()
    assert np.abs(low @ (dx @ c) - fd_x).max() < 1e-6 * scale
    assert np.abs(low @ (dy @ c) - fd_y).max() < 1e-6 * scale


def test_strain_of_known_field():
    # u = (x^2, x y) about the origin with h = 1: eps = (2x, x, y)
    b = VectorBasis(2, np.zeros(2), 1.0)
    c = np.zeros(b.size)
    c[3] = 1.0        # x^2 in the first component
    c[6 + 4] = 1.0    # x y in the second component
    s = strain_of(c, 2, 1.0)
    np.testing.assert_allclose(s[0], [0, 2, 0])
    np.testing.assert_allclose(s[1], [0, 1, 0])
    np.testing.assert_allclose(s[2], [0, 0, 1])


def test_rigid_motions_have_zero_strain():
    b = VectorBasis(3, np.array([0.3, 0.2]), 0.7)
    R = b.rigid_motions()
    pts = np.random.default_rng(0).random((5, 2))
    assert np.abs(np.einsum("pvj,jr->pvr", b.strains(pts), R)).max() < 1e-13
    vals = b.values(pts) @ R[:, 2]
    np.testing.assert_allclose(vals, np.column_stack([pts[:, 1] - 0.2, -(pts[:, 0] - 0.3)]))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_rm_perp_orthonormal_and_orthogonal_to_rm(k, l_shape):
    geom = l_shape.geometry[0]
    rule = polygon_rule(geom, 2 * k + 2)
    rp = build_rm_perp(k, geom, rule)
    b = rp.basis
    M = mass_matrix(b, rule)
    assert rp.size == rm_perp_dim(k)
    np.testing.assert_allclose(rp.coeffs.T @ M @ rp.coeffs, np.eye(rp.size), atol=1e-11)
    assert np.abs(rp.coeffs.T @ M @ b.rigid_motions()).max() < 1e-11


@pytest.mark.parametrize("k", [1, 2])
def test_l2_projection_reproduces_polynomials(k, small_meshes):
    geom = small_meshes["PolyU"].geometry[2]
    rule = polygon_rule(geom, 2 * k + 2)
    b = vector_poly_basis(k, geom)
    c = np.random.default_rng(1).standard_normal(b.size)
    got = l2_project_Pk(lambda p: evaluate(b, c, p), k, geom, rule)
    np.testing.assert_allclose(got, c, atol=1e-11)


def test_negative_degree_rejected(unit_square):
    with pytest.raises(ValueError):
        vector_poly_basis(-1, unit_square.geometry[0])


def test_edge_coordinate_and_monomials():
    a, b = np.array([0.0, 0.0]), np.array([2.0, 2.0])
    s = edge_coordinate(np.array([[0, 0], [1, 1], [2, 2]]), a, b)
    np.testing.assert_allclose(s, [-1, 0, 1])
    np.testing.assert_allclose(edge_monomials(2, s), [[1, -1, 1], [1, 0, 0], [1, 1, 1]])
