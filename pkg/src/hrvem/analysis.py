"""Manufactured solutions, error norms and convergence-rate fitting."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import assemble, build_elements, number_dofs, solve
from .element import edge_traction_dofs, traction_matrix
from .material import ElasticityField, kappa, plane_strain_isotropic, variable_field_test_c
from .mesh import PolygonMesh, mean_edge_length
from .polybasis import edge_monomials, l2_project_Pk
from .quadrature import gauss_1d, polygon_rule

EXACT = "exact"
Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact fields of a test problem; every callable maps (npts, 2) points.

    ``stress`` returns Voigt stresses (s11, s22, s12); ``div_stress`` equals
    ``-f``; ``g`` is the boundary displacement.
    """

    label: str
    u: Field
    grad_u: Callable[[np.ndarray], np.ndarray]
    f: Field
    field: ElasticityField

    def g(self, pts):
        return self.u(pts)

    def strain(self, pts) -> np.ndarray:
        G = self.grad_u(np.atleast_2d(pts))  # (npts, 2, 2), G[:, i, j] = du_i/dx_j
        return np.column_stack([G[:, 0, 0], G[:, 1, 1], G[:, 0, 1] + G[:, 1, 0]])

    def stress(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.einsum("qab,qb->qa", self.field.stiffness(pts), self.strain(pts))

    def div_stress(self, pts) -> np.ndarray:
        return -np.asarray(self.f(np.atleast_2d(pts)))


def _test_a_u(p):
    x, y = p[:, 0], p[:, 1]
    return np.column_stack([x ** 3 - 3 * x * y ** 2, y ** 3 - 3 * x ** 2 * y])


def _test_a_grad(p):
    x, y = p[:, 0], p[:, 1]
    G = np.empty((len(p), 2, 2))
    G[:, 0, 0] = 3 * x ** 2 - 3 * y ** 2
    G[:, 0, 1] = -6 * x * y
    G[:, 1, 0] = -6 * x * y
    G[:, 1, 1] = 3 * y ** 2 - 3 * x ** 2
    return G


def _test_b_u(p):
    s = np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])
    return np.column_stack([s, s])


def _test_b_grad(p):
    x, y = p[:, 0], p[:, 1]
    dx = np.pi * np.cos(np.pi * x) * np.sin(np.pi * y)
    dy = np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)
    G = np.empty((len(p), 2, 2))
    G[:, 0, 0] = G[:, 1, 0] = dx
    G[:, 0, 1] = G[:, 1, 1] = dy
    return G


def _test_b_f(lam: float, mu: float) -> Field:
    def f(p):
        x, y = p[:, 0], p[:, 1]
        ss = np.sin(np.pi * x) * np.sin(np.pi * y)
        cc = np.cos(np.pi * x) * np.cos(np.pi * y)
        v = -np.pi ** 2 * (-(3 * mu + lam) * ss + (mu + lam) * cc)
        return np.column_stack([v, v])

    return f


def _test_c_f(p):
    # sigma = 2 m(x) eps(u) with div eps(u) = 0 and grad m = -2 (x - 1/2)
    x, y = p[:, 0], p[:, 1]
    e11 = 3 * x ** 2 - 3 * y ** 2
    e12 = -6 * x * y
    dx, dy = x - 0.5, y - 0.5
    return 4.0 * np.column_stack([e11 * dx + e12 * dy, e12 * dx - e11 * dy])


def _zero(p):
    return np.zeros((len(p), 2))


def make_test(label: str) -> ManufacturedSolution:
    """Test problems on the unit square: 'a' (cubic, f = 0), 'b' (trigonometric,
    homogeneous boundary data) and 'c' (cubic with variable coefficients)."""
    if label == "a":
        return ManufacturedSolution("a", _test_a_u, _test_a_grad, _zero, plane_strain_isotropic(1.0, 1.0))
    if label == "b":
        return ManufacturedSolution("b", _test_b_u, _test_b_grad, _test_b_f(1.0, 1.0),
                                    plane_strain_isotropic(1.0, 1.0))
    if label == "c":
        return ManufacturedSolution("c", _test_a_u, _test_a_grad, _test_c_f, variable_field_test_c())
    raise ValueError(f"unknown test {label!r}; expected 'a', 'b' or 'c'")


def linear_patch_solution(field: ElasticityField | None = None, coeffs=None) -> ManufacturedSolution:
    """Linear displacement u = c + G x with constant stress and f = 0."""
    field = field or plane_strain_isotropic(1.0, 1.0)
    c = np.array([0.1, -0.2]) if coeffs is None else np.asarray(coeffs[0], dtype=float)
    G = np.array([[0.3, -0.7], [1.1, 0.4]]) if coeffs is None else np.asarray(coeffs[1], dtype=float)

    def u(p):
        return c + np.atleast_2d(p) @ G.T

    def grad(p):
        return np.broadcast_to(G, (len(p), 2, 2))

    return ManufacturedSolution("patch", u, grad, _zero, field)


# ----------------------------------------------------------------------
# error norms


def _edge_quadrature(mesh: PolygonMesh, n_points: int):
    s, w = gauss_1d(n_points).points, gauss_1d(n_points).weights
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    pts = a[:, None, :] + ((s + 1.0) / 2.0)[None, :, None] * (b - a)[:, None, :]
    weights = mesh.edge_lengths[:, None] * w[None, :] / 2.0
    return s, pts, weights


def error_sigma(mesh: PolygonMesh, sol: ManufacturedSolution, sigma_dofs, k: int,
                n_points: int | None = None) -> float:
    """Edge-traction error sqrt(sum_e |e| int_e kappa |(sigma - sigma_h) n|^2)."""
    n_points = n_points or k + 4
    s, pts, weights = _edge_quadrature(mesh, n_points)
    ne = mesh.n_edges
    flat = pts.reshape(-1, 2)
    normals = np.repeat(mesh.edge_normals, n_points, axis=0)
    exact = np.einsum("qca,qa->qc", traction_matrix(normals), sol.stress(flat)).reshape(ne, n_points, 2)
    eb = 2 * (k + 1)
    c = np.asarray(sigma_dofs, dtype=float)[: eb * ne].reshape(ne, 2, k + 1)
    approx = np.einsum("qj,ecj->eqc", edge_monomials(k, s), c)
    kap = kappa(sol.field, flat).reshape(ne, n_points)
    per_edge = np.sum(weights * kap * np.sum((exact - approx) ** 2, axis=2), axis=1)
    return math.sqrt(math.fsum(mesh.edge_lengths * per_edge))


def _elements(mesh, k, elements):
    return build_elements(mesh, k) if elements is None else elements


def error_sigma_div(mesh: PolygonMesh, sol: ManufacturedSolution, sigma_dofs, k: int,
                    elements=None, degree: int | None = None) -> float:
    """L2 error of the divergence, with div sigma_h rebuilt from the dofs."""
    dm = number_dofs(mesh, k)
    sig = np.asarray(sigma_dofs, dtype=float)
    total = []
    for el in _elements(mesh, k, elements):
        rule = polygon_rule(el.geom, degree or min(2 * k + 6, 20))
        coeffs = el.divergence(sig[dm.cell_stress_dofs(mesh, el.cell)])
        diff = sol.div_stress(rule.points) - el.basis.values(rule.points) @ coeffs
        total.append(rule.integrate(np.sum(diff ** 2, axis=1)))
    return math.sqrt(math.fsum(total))


def error_u(mesh: PolygonMesh, sol: ManufacturedSolution, u_coeffs, k: int,
            elements=None, degree: int | None = None) -> float:
    """L2 error of the displacement."""
    dm = number_dofs(mesh, k)
    u = np.asarray(u_coeffs, dtype=float)
    total = []
    for el in _elements(mesh, k, elements):
        rule = polygon_rule(el.geom, degree or min(2 * k + 6, 20))
        diff = sol.u(rule.points) - el.basis.values(rule.points) @ u[dm.cell_u_dofs(el.cell)]
        total.append(rule.integrate(np.sum(diff ** 2, axis=1)))
    return math.sqrt(math.fsum(total))


def stress_norm(mesh: PolygonMesh, sol: ManufacturedSolution, k: int) -> float:
    """E_sigma of a zero discrete stress, the scale for relative thresholds."""
    return error_sigma(mesh, sol, np.zeros(2 * (k + 1) * mesh.n_edges), k)


def interpolate_global(mesh: PolygonMesh, stress, div_stress, k: int, elements=None) -> np.ndarray:
    """Global stress dofs of the interpolant of an analytic stress field."""
    dm = number_dofs(mesh, k)
    out = np.zeros(dm.n_sigma)
    n_points = max(k + 8, 10)
    for e in range(mesh.n_edges):
        ia, ib = mesh.edges[e]
        out[dm.edge_dofs(e)] = edge_traction_dofs(mesh.vertices[ia], mesh.vertices[ib],
                                                  mesh.edge_normals[e], stress, k, n_points)
    for el in _elements(mesh, k, elements):
        local = el.interpolate(stress, div_stress)
        out[dm.cell_stress_dofs(mesh, el.cell)[el.gamma_slice]] = local[el.gamma_slice]
    return out


# ----------------------------------------------------------------------
# rates


def fit_rate(levels, threshold: float = 1e-12):
    """Least-squares slope of log(error) against log(h) over the finest levels.

    Levels whose error is at or below ``threshold`` are treated as exact and
    excluded; if every level is exact, returns :data:`EXACT`.  The finest
    min(3, available) remaining levels are fitted; with fewer than two the
    result is NaN.
    """
    pts = sorted(((float(h), float(e)) for h, e in levels), key=lambda t: -t[0])
    if len(pts) < 2:
        raise ValueError("need at least two levels")
    kept = [(h, e) for h, e in pts if e > threshold]
    if not kept:
        return EXACT
    kept = kept[-3:]
    if len(kept) < 2:
        return math.nan
    x = np.log([h for h, _ in kept])
    y = np.log([e for _, e in kept])
    return float(np.polyfit(x, y, 1)[0])


# ----------------------------------------------------------------------
# commuting diagram


def check_commuting_diagram(mesh: PolygonMesh, stress, div_stress, k: int, elements=None) -> float:
    """Largest cellwise L2 gap between div(I_h sigma) and P_k(div sigma).

    Divided by the global L2 norm of div sigma, unless that norm vanishes.
    """
    worst = 0.0
    total = []
    for el in _elements(mesh, k, elements):
        rule = polygon_rule(el.geom, min(2 * k + 12, 20))
        dofs = el.interpolate(stress, div_stress)
        lhs = el.divergence(dofs)
        rhs = l2_project_Pk(div_stress, k, el.geom, rule)
        d = lhs - rhs
        worst = max(worst, math.sqrt(max(d @ el.mass @ d, 0.0)))
        total.append(rule.integrate(np.sum(np.asarray(div_stress(rule.points)) ** 2, axis=1)))
    norm = math.sqrt(math.fsum(total))
    return worst / norm if norm > 1e-14 else worst


# ----------------------------------------------------------------------
# one refinement level


@dataclass
class LevelResult:
    n: int
    h_bar_e: float
    E_sigma: float
    E_sigma_div: float
    E_u: float
    n_sigma: int
    n_u: int
    seconds: float
    sigma_norm: float = field(default=math.nan, repr=False)
    f_norm: float = field(default=math.nan, repr=False)

    @property
    def n_dofs(self) -> int:
        return self.n_sigma + self.n_u


def run_level(mesh: PolygonMesh, sol: ManufacturedSolution, k: int, n: int = 0,
              tol: float = 1e-10) -> LevelResult:
    t0 = time.perf_counter()
    elements = build_elements(mesh, k)
    system = assemble(mesh, sol.field, k, f=sol.f, g=sol.g, elements=elements)
    x = solve(system, tol)
    es = error_sigma(mesh, sol, x.sigma, k)
    ed = error_sigma_div(mesh, sol, x.sigma, k, elements)
    eu = error_u(mesh, sol, x.u, k, elements)
    seconds = time.perf_counter() - t0
    # scale of the exact fields for exactness thresholds
    fnorm = error_sigma_div(mesh, sol, np.zeros(system.dofmap.n_sigma), k, elements)
    return LevelResult(n, mean_edge_length(mesh), es, ed, eu, system.dofmap.n_sigma,
                       system.dofmap.n_u, seconds, stress_norm(mesh, sol, k), fnorm)
