"""Global numbering, saddle-point assembly and the sparse solve."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .element import VirtualElement, displacement_dof_count, local_dirichlet_term
from .material import ElasticityField
from .polybasis import rm_perp_dim

log = logging.getLogger(__name__)


class SolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class GlobalDofMap:
    """Stress unknowns: edge tractions (by edge id), then cell divergence blocks.
    Displacement unknowns follow cell by cell."""

    k: int
    n_edges: int
    n_cells: int

    @property
    def edge_block(self) -> int:
        return 2 * (self.k + 1)

    @property
    def cell_block(self) -> int:
        return rm_perp_dim(self.k)

    @property
    def u_block(self) -> int:
        return displacement_dof_count(self.k)

    @property
    def n_sigma(self) -> int:
        return self.edge_block * self.n_edges + self.cell_block * self.n_cells

    @property
    def n_u(self) -> int:
        return self.u_block * self.n_cells

    @property
    def size(self) -> int:
        return self.n_sigma + self.n_u

    def edge_dofs(self, e: int) -> np.ndarray:
        return self.edge_block * e + np.arange(self.edge_block)

    def cell_stress_dofs(self, mesh, c: int) -> np.ndarray:
        """Global indices of the local stress dofs of cell ``c`` in local order."""
        eb = self.edge_block
        edge_part = (eb * mesh.cell_edges[c][:, None] + np.arange(eb)).ravel()
        off = eb * self.n_edges + self.cell_block * c
        return np.concatenate([edge_part, off + np.arange(self.cell_block)])

    def cell_u_dofs(self, c: int) -> np.ndarray:
        return self.u_block * c + np.arange(self.u_block)


def number_dofs(mesh, k: int) -> GlobalDofMap:
    return GlobalDofMap(k, mesh.n_edges, mesh.n_cells)


@dataclass
class SaddleSystem:
    """Symmetric indefinite system [[A, B^T], [B, 0]] [sigma; u] = [g; -f]."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofmap: GlobalDofMap
    elements: list = field(repr=False, default_factory=list)
    asymmetry: float = 0.0

    @property
    def A(self):
        n = self.dofmap.n_sigma
        return self.matrix[:n, :n]

    @property
    def B(self):
        n = self.dofmap.n_sigma
        return self.matrix[n:, :n]


def build_elements(mesh, k: int, **kwargs) -> list[VirtualElement]:
    return [VirtualElement(mesh, c, k, **kwargs) for c in range(mesh.n_cells)]


def assemble(mesh, field: ElasticityField, k: int, f=None, g=None,
             elements: list[VirtualElement] | None = None) -> SaddleSystem:
    """Assemble the discrete mixed problem.

    ``f`` is the body force and ``g`` the boundary displacement; both map an
    (npts, 2) array of points to (npts, 2) values and default to zero.
    """
    dm = number_dofs(mesh, k)
    if elements is None:
        elements = build_elements(mesh, k)
    rows, cols, vals = [], [], []
    rhs = np.zeros(dm.size)
    for el in elements:
        mats = el.matrices(field)
        sd = dm.cell_stress_dofs(mesh, el.cell)
        ud = dm.n_sigma + dm.cell_u_dofs(el.cell)
        rows.append(np.repeat(sd, len(sd)))
        cols.append(np.tile(sd, len(sd)))
        vals.append(mats.Ah.ravel())
        # B block and its transpose
        rows.append(np.repeat(ud, len(sd)))
        cols.append(np.tile(sd, len(ud)))
        vals.append(mats.B.T.ravel())
        rows.append(np.repeat(sd, len(ud)))
        cols.append(np.tile(ud, len(sd)))
        vals.append(mats.B.ravel())
        if f is not None:
            rhs[ud] -= el.load(f)
    M = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(dm.size, dm.size)).tocsr()
    M.sum_duplicates()
    if not np.all(np.isfinite(M.data)):
        raise FloatingPointError("non-finite entries in the assembled matrix")
    asym = abs(M - M.T).max() if M.nnz else 0.0
    scale = abs(M).max() if M.nnz else 1.0
    if asym > 1e-12 * scale:
        raise SolveError(f"assembled matrix is not symmetric (deviation {asym:.3e})")
    M = ((M + M.T) * 0.5).tocsr()
    if g is not None:
        for e in np.flatnonzero(mesh.boundary):
            rhs[dm.edge_dofs(e)] += local_dirichlet_term(mesh, int(e), g, k)
    return SaddleSystem(M, rhs, dm, elements, float(asym))


@dataclass
class Solution:
    sigma: np.ndarray
    u: np.ndarray
    residual: float


def solve(system: SaddleSystem, tol: float = 1e-10) -> Solution:
    """Direct sparse LU solve with a residual check."""
    b = system.rhs
    nrm = np.linalg.norm(b)
    n = system.dofmap.n_sigma
    if nrm == 0.0:
        x = np.zeros_like(b)
        return Solution(x[:n], x[n:], 0.0)
    A = system.matrix.tocsc()
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SolveError(f"singular factorization ({exc}); check the mesh and boundary data") from exc
    x = lu.solve(b)
    res = np.linalg.norm(A @ x - b) / nrm
    if not res <= tol:
        # one step of iterative refinement before giving up
        x += lu.solve(b - A @ x)
        res = np.linalg.norm(A @ x - b) / nrm
    if not res <= tol:
        cond = spla.onenormest(A) * spla.onenormest(spla.LinearOperator(A.shape, lu.solve, rmatvec=lambda v: lu.solve(v, "T")))
        raise SolveError(f"relative residual {res:.3e} above {tol:.1e} (condition estimate {cond:.3e})")
    log.debug("solved %d unknowns, relative residual %.2e", len(b), res)
    return Solution(x[:n], x[n:], float(res))


def write_matrix_market(system: SaddleSystem, path) -> None:
    """Dump the system matrix in MatrixMarket coordinate symmetric format."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(system.matrix), symmetry="symmetric",
                     comment="mixed virtual element saddle-point matrix", precision=17)
