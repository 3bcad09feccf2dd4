"""Local virtual element for the mixed stress-displacement formulation.

Stress degrees of freedom on a cell with ``n_E`` edges, in local order:

* for every local edge, the ``2(k+1)`` coefficients of the traction
  ``tau n_g`` (``n_g`` the *global* edge normal) in the edge monomials
  ``1, s, ..., s^k``, first component then second component;
* the ``m_k`` coefficients of ``div tau`` along an L2-orthonormal basis of
  RM_k^perp(E).

Because the edge blocks refer to the global normal, they coincide with the
global unknowns and no sign flips are needed when scattering.  The cell
outward traction is ``sign * tau n_g``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .material import ElasticityField, kappa
from .polybasis import (
    RMPerpBasis,
    VectorBasis,
    build_rm_perp,
    derivative_matrices,
    edge_monomials,
    mass_matrix,
    rm_perp_dim,
    strain_of,
    vector_poly_basis,
)
from .quadrature import edge_rule, gauss_1d, polygon_rule


def stress_dof_count(k: int, n_edges: int) -> int:
    return 2 * (k + 1) * n_edges + rm_perp_dim(k)


def displacement_dof_count(k: int) -> int:
    return (k + 1) * (k + 2)


def traction_matrix(normals: np.ndarray) -> np.ndarray:
    """Maps Voigt stress (s11, s22, s12) to traction, shape (npts, 2, 3)."""
    n1, n2 = normals[..., 0], normals[..., 1]
    z = np.zeros_like(n1)
    return np.stack([np.stack([n1, z, n2], axis=-1),
                     np.stack([z, n2, n1], axis=-1)], axis=-2)


@dataclass(frozen=True)
class EdgeData:
    edge: int
    sign: int
    a: np.ndarray  # endpoint with the lower global vertex id
    b: np.ndarray
    length: float
    normal: np.ndarray  # global normal
    s: np.ndarray  # quadrature nodes in [-1, 1]
    points: np.ndarray
    weights: np.ndarray


@dataclass
class LocalElementMatrices:
    Pi: np.ndarray  # stress dofs -> P_{k+1}(E)^2 coefficients
    K: np.ndarray  # int C eps(p) : eps(q) over P_{k+1}(E)^2
    Ah: np.ndarray
    Se: np.ndarray
    B: np.ndarray  # (stress dofs, displacement dofs)
    kappa: float


class VirtualElement:
    """Geometry-dependent data of one cell, shared by every material.

    Parameters
    ----------
    mesh, cell
        The polygonal mesh and the cell index.
    k
        Polynomial order, ``k >= 1``.
    volume_degree
        Exactness degree of the cell quadrature; defaults to ``2k + 4``.
    edge_points
        Gauss points per edge; defaults to ``k + 3``.
    """

    def __init__(self, mesh, cell: int, k: int, volume_degree: int | None = None,
                 edge_points: int | None = None):
        if k < 1:
            raise ValueError("order k must be at least 1")
        self.mesh = mesh
        self.cell = cell
        self.k = k
        self.geom = mesh.geometry[cell]
        self.volume_degree = 2 * k + 4 if volume_degree is None else volume_degree
        self.edge_points = k + 3 if edge_points is None else edge_points
        self.rule = polygon_rule(self.geom, self.volume_degree)
        self.basis = vector_poly_basis(k, self.geom)
        self.basis1 = vector_poly_basis(k + 1, self.geom)
        self.mass = mass_matrix(self.basis, self.rule)
        self.rmperp: RMPerpBasis = build_rm_perp(k, self.geom, self.rule, mass=self.mass)

        s, w = gauss_1d(self.edge_points).points, gauss_1d(self.edge_points).weights
        self.edges: list[EdgeData] = []
        for e, sign in zip(mesh.cell_edges[cell], mesh.cell_signs[cell]):
            ia, ib = mesh.edges[e]
            a, b = mesh.vertices[ia], mesh.vertices[ib]
            L = float(mesh.edge_lengths[e])
            pts = a + np.outer((s + 1.0) / 2.0, b - a)
            self.edges.append(EdgeData(int(e), int(sign), a, b, L, mesh.edge_normals[e],
                                       s, pts, w * L / 2.0))
        self.n_edges = len(self.edges)
        self.n_edge_dofs = 2 * (k + 1)
        self.n_dofs = stress_dof_count(k, self.n_edges)
        self.n_udofs = displacement_dof_count(k)
        self.gamma_slice = slice(self.n_edge_dofs * self.n_edges, self.n_dofs)

        # stacked boundary quadrature: points, weights, outward normals, traction basis
        self.bpoints = np.vstack([ed.points for ed in self.edges])
        self.bweights = np.concatenate([ed.weights for ed in self.edges])
        self.bnormals = np.vstack([np.tile(ed.sign * ed.normal, (len(ed.s), 1)) for ed in self.edges])
        self.btraction = self._boundary_traction_basis()
        self.div_matrix = self._divergence_matrix()

    # ------------------------------------------------------------------
    def _boundary_traction_basis(self) -> np.ndarray:
        """Outward traction of every stress dof at the boundary nodes, (nb, 2, ndofs)."""
        k1 = self.k + 1
        nq = self.edge_points
        T = np.zeros((self.n_edges * nq, 2, self.n_dofs))
        for i, ed in enumerate(self.edges):
            ms = ed.sign * edge_monomials(self.k, ed.s)
            rows = slice(i * nq, (i + 1) * nq)
            off = i * 2 * k1
            T[rows, 0, off:off + k1] = ms
            T[rows, 1, off + k1:off + 2 * k1] = ms
        return T

    def _divergence_matrix(self) -> np.ndarray:
        """Coefficients of div tau in P_k(E)^2 for every stress dof, (2 n_k, ndofs)."""
        geom = self.geom
        T, w = self.btraction, self.bweights
        alpha = np.einsum("q,qcj->cj", w, T) / geom.area
        d = self.bpoints - geom.centroid
        perp = np.column_stack([d[:, 1], -d[:, 0]])
        beta = np.einsum("q,qc,qcj->j", w, perp, T) / geom.second_moment
        R = self.basis.rigid_motions()
        D = R[:, :2] @ alpha + np.outer(R[:, 2], beta)
        D[:, self.gamma_slice] += self.rmperp.coeffs
        return D

    # ------------------------------------------------------------------
    def divergence(self, dofs) -> np.ndarray:
        """Coefficients of div tau_h in the P_k(E)^2 basis."""
        return self.div_matrix @ np.asarray(dofs, dtype=float)

    def matrices(self, field: ElasticityField) -> LocalElementMatrices:
        """Projector, stabilization and local matrices for a material."""
        Pi, K = self.projector(field)
        kap = kappa(field, self.geom.centroid)
        Se = self.stabilization(field, Pi, kap)
        Ah = Pi.T @ K @ Pi + Se
        Ah = 0.5 * (Ah + Ah.T)
        B = self.div_matrix.T @ self.mass
        return LocalElementMatrices(Pi, K, Ah, Se, B, kap)

    def energy_gram(self, field: ElasticityField) -> np.ndarray:
        pts, w = self.rule.points, self.rule.weights
        E = self.basis1.strains(pts)
        C = field.stiffness(pts)
        if not np.all(np.isfinite(C)):
            raise FloatingPointError("material evaluation produced non-finite values")
        K = np.einsum("q,qai,qab,qbj->ij", w, E, C, E)
        return 0.5 * (K + K.T)

    def projector(self, field: ElasticityField) -> tuple[np.ndarray, np.ndarray]:
        """Energy projection onto C eps(P_{k+1}(E)^2), computed from dofs only.

        The right-hand side int tau : eps(q) is integrated by parts into a
        boundary traction term and a divergence term; the rigid-motion part
        of p is pinned by int p . r = 0.
        """
        K = self.energy_gram(field)
        b1 = self.basis1
        Q = b1.values(self.bpoints)
        bnd = np.einsum("q,qci,qcj->ij", self.bweights, Q, self.btraction)
        M1k = mass_matrix(b1, self.rule, self.basis)
        rhs = bnd - M1k @ self.div_matrix
        L = b1.rigid_motions().T @ mass_matrix(b1, self.rule)
        n1 = b1.size
        aug = np.zeros((n1 + 3, n1 + 3))
        aug[:n1, :n1] = K
        aug[:n1, n1:] = L.T
        aug[n1:, :n1] = L
        full_rhs = np.vstack([rhs, np.zeros((3, self.n_dofs))])
        try:
            sol = np.linalg.solve(aug, full_rhs)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"cell {self.cell}: singular projector system") from exc
        return sol[:n1], K

    def projected_traction(self, field: ElasticityField, Pi: np.ndarray) -> np.ndarray:
        """Outward traction of C eps(Pi tau) at boundary nodes, (nb, 2, ndofs)."""
        pts = self.bpoints
        stress = np.einsum("qab,qbi,ij->qaj", field.stiffness(pts), self.basis1.strains(pts), Pi)
        return np.einsum("qca,qaj->qcj", traction_matrix(self.bnormals), stress)

    def stabilization(self, field: ElasticityField, Pi: np.ndarray, kap: float | None = None):
        if kap is None:
            kap = kappa(field, self.geom.centroid)
        diff = self.btraction - self.projected_traction(field, Pi)
        Se = kap * self.geom.diameter * np.einsum("q,qci,qcj->ij", self.bweights, diff, diff)
        return 0.5 * (Se + Se.T)

    # ------------------------------------------------------------------
    def load(self, f, rule=None) -> np.ndarray:
        """int_E f . v_j for the displacement basis."""
        rule = self.rule if rule is None else rule
        vals = np.asarray(f(rule.points), dtype=float).reshape(-1, 2)
        return np.einsum("q,qc,qcj->j", rule.weights, vals, self.basis.values(rule.points))

    def interpolate(self, stress, div_stress, volume_degree: int | None = None,
                    edge_points: int | None = None) -> np.ndarray:
        """Stress dofs matching the edge-traction and RM^perp divergence moments.

        ``stress(pts)`` returns Voigt stresses (npts, 3); ``div_stress(pts)``
        returns the divergence (npts, 2).
        """
        k = self.k
        k1 = k + 1
        n_pts = edge_points or max(k + 8, 10)
        dofs = np.zeros(self.n_dofs)
        for i, ed in enumerate(self.edges):
            dofs[i * 2 * k1:(i + 1) * 2 * k1] = edge_traction_dofs(ed.a, ed.b, ed.normal, stress, k, n_pts)
        rule = polygon_rule(self.geom, min(2 * k + 12, 20) if volume_degree is None else volume_degree)
        psi = self.rmperp.basis.values(rule.points) @ self.rmperp.coeffs
        mom = np.einsum("q,qc,qci->i", rule.weights, np.asarray(div_stress(rule.points)).reshape(-1, 2), psi)
        gram = np.einsum("q,qci,qcj->ij", rule.weights, psi, psi)
        dofs[self.gamma_slice] = np.linalg.solve(gram, mom)
        return dofs

    def polynomial_stress_dofs(self, field: ElasticityField, p_coeffs) -> np.ndarray:
        """Dofs of tau = C eps(p), p in P_{k+1}(E)^2, for a constant material.

        Tractions and divergence are polynomials here, so every moment is exact.
        """
        if not field.constant:
            raise ValueError("exact polynomial dofs need a constant material")
        p = np.asarray(p_coeffs, dtype=float)
        C = field.stiffness(self.geom.centroid)[0]
        b1 = self.basis1

        def stress(pts):
            return np.einsum("ab,qbi,i->qa", C, b1.strains(pts), p)

        # Voigt stress coefficients in P_k, then divergence in P_{k-1}
        s = C @ strain_of(p, self.k + 1, b1.h)
        dx, dy = derivative_matrices(self.k, b1.h)
        div = np.concatenate([dx @ s[0] + dy @ s[2], dx @ s[2] + dy @ s[1]])
        low = VectorBasis(self.k - 1, b1.center, b1.h)

        def div_stress(pts):
            return low.values(pts) @ div

        return self.interpolate(stress, div_stress, volume_degree=2 * self.k + 2,
                                edge_points=self.k + 2)


def edge_traction_dofs(a, b, normal, stress, k: int, n_points: int) -> np.ndarray:
    """Coefficients of the L2(e) projection of ``stress . normal`` on 1, s, ..., s^k."""
    rule = edge_rule(a, b, n_points)
    s = gauss_1d(n_points).points
    ms = edge_monomials(k, s)
    t = np.einsum("qca,qa->qc", traction_matrix(np.broadcast_to(normal, (n_points, 2))),
                  np.asarray(stress(rule.points)).reshape(-1, 3))
    gram = ms.T @ (rule.weights[:, None] * ms)
    mom = ms.T @ (rule.weights[:, None] * t)
    c = np.linalg.solve(gram, mom)
    return np.concatenate([c[:, 0], c[:, 1]])


# ----------------------------------------------------------------------
# functional surface


def divergence_from_dofs(element: VirtualElement, dofs) -> np.ndarray:
    return element.divergence(dofs)


def projector_pi(element: VirtualElement, field: ElasticityField) -> np.ndarray:
    return element.projector(field)[0]


def stabilization_matrix(element: VirtualElement, field: ElasticityField, Pi: np.ndarray) -> np.ndarray:
    return element.stabilization(field, Pi)


def local_stress_matrix(element: VirtualElement, field: ElasticityField) -> np.ndarray:
    Ah = element.matrices(field).Ah
    if np.linalg.eigvalsh(Ah)[0] <= 0.0:
        raise np.linalg.LinAlgError(f"cell {element.cell}: local stress matrix is not positive definite")
    return Ah


def local_divergence_matrix(element: VirtualElement) -> np.ndarray:
    return element.div_matrix.T @ element.mass


def local_load(element: VirtualElement, f, rule=None) -> np.ndarray:
    return element.load(f, rule)


def local_dirichlet_term(mesh, edge: int, g, k: int, n_points: int | None = None) -> np.ndarray:
    """Contribution int_e (tau n) . g for the 2(k+1) dofs of a boundary edge.

    ``n`` is the outward normal of the domain; the dofs refer to the global
    edge normal, hence the sign.
    """
    if not mesh.boundary[edge]:
        raise ValueError(f"edge {edge} is not on the boundary")
    c = mesh.edge_cells[edge, 0]
    sign = mesh.cell_signs[c][list(mesh.cell_edges[c]).index(edge)]
    ia, ib = mesh.edges[edge]
    n_points = n_points or k + 4
    rule = edge_rule(mesh.vertices[ia], mesh.vertices[ib], n_points)
    ms = edge_monomials(k, gauss_1d(n_points).points)
    gv = np.asarray(g(rule.points), dtype=float).reshape(-1, 2)
    mom = ms.T @ (rule.weights[:, None] * gv)
    return sign * np.concatenate([mom[:, 0], mom[:, 1]])


def interpolate_stress(element: VirtualElement, stress, div_stress) -> np.ndarray:
    return element.interpolate(stress, div_stress)
