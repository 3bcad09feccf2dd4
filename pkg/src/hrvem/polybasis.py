"""Scaled monomial bases on cells and edges.

Scalar monomials on a cell are ``m_a(x) = ((x - x_C) / h_E) ** a`` for
multi-indices ``a = (a1, a2)`` with ``|a| <= d``, ordered by total degree,
then by decreasing power of x.  The vector space P_d(E)^2 uses the ordering
``(m_0, 0), ..., (m_last, 0), (0, m_0), ..., (0, m_last)``.

Strains are stored in Voigt form ``(e11, e22, 2 e12)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


def n_monomials(d: int) -> int:
    return (d + 1) * (d + 2) // 2 if d >= 0 else 0


def rm_perp_dim(k: int) -> int:
    return (k + 1) * (k + 2) - 3


@lru_cache(maxsize=None)
def monomial_exponents(d: int) -> np.ndarray:
    exps = np.array([(t - j, j) for t in range(d + 1) for j in range(t + 1)], dtype=np.int64)
    exps.flags.writeable = False
    return exps


def monomials(d: int, pts, center, h: float) -> np.ndarray:
    """Values of the scaled monomials of degree <= d, shape (npts, n_monomials(d))."""
    z = (np.atleast_2d(pts) - center) / h
    exps = monomial_exponents(d)
    px = z[:, 0, None] ** np.arange(d + 1)
    py = z[:, 1, None] ** np.arange(d + 1)
    return px[:, exps[:, 0]] * py[:, exps[:, 1]]


@lru_cache(maxsize=None)
def _derivative_pattern(d: int):
    lower = {tuple(a): i for i, a in enumerate(monomial_exponents(d - 1))} if d > 0 else {}
    dx = np.zeros((n_monomials(d - 1), n_monomials(d)))
    dy = np.zeros_like(dx)
    for j, (a1, a2) in enumerate(monomial_exponents(d)):
        if a1:
            dx[lower[(a1 - 1, a2)], j] = a1
        if a2:
            dy[lower[(a1, a2 - 1)], j] = a2
    dx.flags.writeable = False
    dy.flags.writeable = False
    return dx, dy


def derivative_matrices(d: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient maps P_d -> P_{d-1} for d/dx and d/dy of scaled monomials."""
    dx, dy = _derivative_pattern(d)
    return dx / h, dy / h


def strain_matrix(d: int, h: float) -> np.ndarray:
    """Map coefficients of p in P_d(E)^2 to Voigt strain coefficients in P_{d-1}.

    Returns an array of shape (3, n_monomials(d-1), 2 * n_monomials(d)).
    """
    dx, dy = derivative_matrices(d, h)
    nl, n = dx.shape
    S = np.zeros((3, nl, 2 * n))
    S[0, :, :n] = dx
    S[1, :, n:] = dy
    S[2, :, :n] = dy
    S[2, :, n:] = dx
    return S


def strain_of(coeffs, d: int, h: float) -> np.ndarray:
    """Voigt strain of the vector polynomial with ``coeffs`` in P_d(E)^2.

    Result has shape (3, n_monomials(d-1)): coefficients of e11, e22 and
    2*e12 in the degree d-1 scaled monomials of the same cell.
    """
    return strain_matrix(d, h) @ np.asarray(coeffs, dtype=float)


@dataclass(frozen=True)
class VectorBasis:
    """Basis of P_d(E)^2 on one cell."""

    degree: int
    center: np.ndarray
    h: float

    @property
    def size(self) -> int:
        return 2 * n_monomials(self.degree)

    def values(self, pts) -> np.ndarray:
        """Shape (npts, 2, size)."""
        m = monomials(self.degree, pts, self.center, self.h)
        n = m.shape[1]
        out = np.zeros((m.shape[0], 2, 2 * n))
        out[:, 0, :n] = m
        out[:, 1, n:] = m
        return out

    def strains(self, pts) -> np.ndarray:
        """Voigt strains at points, shape (npts, 3, size)."""
        if self.degree == 0:
            return np.zeros((len(np.atleast_2d(pts)), 3, self.size))
        m = monomials(self.degree - 1, pts, self.center, self.h)
        return np.einsum("pl,vlj->pvj", m, strain_matrix(self.degree, self.h))

    def rigid_motions(self) -> np.ndarray:
        """Coefficients (size, 3) of (1,0), (0,1) and (x - x_C)^perp."""
        n = n_monomials(self.degree)
        R = np.zeros((2 * n, 3))
        R[0, 0] = 1.0
        R[n, 1] = 1.0
        if self.degree >= 1:
            # (y - y_C, -(x - x_C)) = h * (m_(0,1), -m_(1,0))
            R[2, 2] = self.h
            R[n + 1, 2] = -self.h
        return R


def vector_poly_basis(k: int, geom) -> VectorBasis:
    if k < 0:
        raise ValueError("degree must be non-negative")
    return VectorBasis(k, np.asarray(geom.centroid), float(geom.diameter))


def mass_matrix(basis: VectorBasis, rule, other: VectorBasis | None = None) -> np.ndarray:
    """L2(E) Gram matrix between two vector bases (``other`` defaults to ``basis``)."""
    a = basis.values(rule.points)
    b = a if other is None else other.values(rule.points)
    return np.einsum("p,pci,pcj->ij", rule.weights, a, b)


@dataclass(frozen=True)
class RMPerpBasis:
    """L2(E)-orthonormal basis of the complement of RM(E) in P_k(E)^2.

    ``coeffs[:, i]`` holds the coefficients of psi_i in the vector basis.
    """

    basis: VectorBasis
    coeffs: np.ndarray

    @property
    def size(self) -> int:
        return self.coeffs.shape[1]


def build_rm_perp(k: int, geom, rule, mass: np.ndarray | None = None) -> RMPerpBasis:
    """Build RM_k^perp(E) numerically.

    Every vector monomial is projected off RM(E) in L2(E); the projected set
    spans the complement with exactly three redundant directions, removed by
    an eigen-decomposition of its Gram matrix.
    """
    basis = vector_poly_basis(k, geom)
    M = mass_matrix(basis, rule) if mass is None else mass
    R = basis.rigid_motions()
    MR = M @ R
    P = np.eye(basis.size) - R @ np.linalg.solve(R.T @ MR, MR.T)
    G = P.T @ M @ P
    G = 0.5 * (G + G.T)
    lam, V = np.linalg.eigh(G)
    m = rm_perp_dim(k)
    lam, V = lam[-m:], V[:, -m:]
    if lam[0] <= 1e-12 * lam[-1]:
        raise np.linalg.LinAlgError("degenerate cell: RM complement Gram matrix is singular")
    return RMPerpBasis(basis, P @ V / np.sqrt(lam))


def l2_project_Pk(f, k: int, geom, rule, mass: np.ndarray | None = None) -> np.ndarray:
    """Coefficients of the L2(E) projection of the vector field ``f`` onto P_k(E)^2.

    ``f`` maps an (npts, 2) array of points to an (npts, 2) array of values.
    """
    basis = vector_poly_basis(k, geom)
    M = mass_matrix(basis, rule) if mass is None else mass
    vals = np.asarray(f(rule.points), dtype=float).reshape(-1, 2)
    rhs = np.einsum("p,pc,pci->i", rule.weights, vals, basis.values(rule.points))
    return np.linalg.solve(M, rhs)


def evaluate(basis: VectorBasis, coeffs, pts) -> np.ndarray:
    """Values (npts, 2) of the vector polynomial with the given coefficients."""
    return basis.values(pts) @ np.asarray(coeffs, dtype=float)


def edge_coordinate(x, a, b) -> np.ndarray:
    """Normalized coordinate s in [-1, 1] on the edge from ``a`` (s=-1) to ``b``.

    ``a`` must be the endpoint with the lower global vertex id.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    t = (np.atleast_2d(x) - a) @ d / (d @ d)
    return 2.0 * (t - 0.5)


def edge_monomials(k: int, s) -> np.ndarray:
    """Values of 1, s, ..., s**k at the edge coordinates ``s``, shape (npts, k+1)."""
    return np.asarray(s, dtype=float)[..., None] ** np.arange(k + 1)
