"""Numerical property checks of the discretization.

Each check returns a :class:`CheckResult` carrying the measured worst value
and the bound it is compared against.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import (check_commuting_diagram, error_u, interpolate_global,
                       linear_patch_solution, make_test)
from .assembly import assemble, build_elements, solve
from .element import displacement_dof_count, stress_dof_count
from .material import plane_strain_isotropic
from .mesh import MeshFamily, generate_mesh
from .polybasis import strain_of


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    bound: float
    ok: bool
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.ok else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"{tag} {self.name}: {self.value:.3e} vs {self.bound:.1e}{extra}"


def _le(name, value, bound, detail=""):
    value = float(value)
    return CheckResult(name, value, bound, bool(value <= bound), detail)


def patch_test(mesh, k: int = 1) -> tuple[float, float]:
    """Relative stress-dof error and absolute displacement L2 error for linear data."""
    sol = linear_patch_solution()
    elements = build_elements(mesh, k)
    x = solve(assemble(mesh, sol.field, k, f=sol.f, g=sol.g, elements=elements))
    ref = interpolate_global(mesh, sol.stress, sol.div_stress, k, elements)
    es = np.abs(x.sigma - ref).max() / np.abs(ref).max()
    return float(es), float(error_u(mesh, sol, x.u, k, elements))


def structure_report(mesh, k: int, field=None) -> dict:
    """Per-mesh DOF-count, definiteness and inf-sup rank witnesses."""
    field = field or plane_strain_isotropic(1.0, 1.0)
    elements = build_elements(mesh, k)
    count_ok, min_ah, min_se = True, np.inf, np.inf
    for el in elements:
        count_ok &= el.n_dofs == stress_dof_count(k, el.n_edges)
        count_ok &= el.n_dofs == 2 * (k + 1) * el.n_edges + (k + 1) * (k + 2) - 3
        count_ok &= el.n_udofs == displacement_dof_count(k) == (k + 1) * (k + 2)
        m = el.matrices(field)
        ev = np.linalg.eigvalsh(m.Ah)
        min_ah = min(min_ah, ev[0] / ev[-1])
        es = np.linalg.eigvalsh(m.Se)
        min_se = min(min_se, es[0] / max(es[-1], 1e-300))
    system = assemble(mesh, field, k, elements=elements)
    B = system.B.toarray()
    sv = np.linalg.svd(B, compute_uv=False)
    rank = int(np.sum(sv > 1e-10 * sv[0]))
    return {"counts": bool(count_ok), "min_ah": float(min_ah), "min_se": float(min_se),
            "rank": rank, "rows": B.shape[0], "min_sv": float(sv[-1] / sv[0])}


def projector_consistency(mesh, k: int, n_samples: int = 20, seed: int = 0) -> float:
    """Worst relative gap between eps(Pi dofs(C eps(p))) and eps(p) over random p."""
    field = plane_strain_isotropic(1.0, 1.0)
    rng = np.random.default_rng(seed)
    elements = build_elements(mesh, k)
    worst = 0.0
    for i in range(n_samples):
        el = elements[i % len(elements)]
        Pi = el.matrices(field).Pi
        p = rng.standard_normal(el.basis1.size)
        h = el.basis1.h
        ref = strain_of(p, k + 1, h)
        got = strain_of(Pi @ el.polynomial_stress_dofs(field, p), k + 1, h)
        worst = max(worst, np.abs(got - ref).max() / np.abs(ref).max())
    return float(worst)


def commuting_gap(k: int, n: int = 8, family: str = "PolyU", seed: int = 0) -> float:
    sol = make_test("b")
    mesh = generate_mesh(family, n, seed=seed)
    return check_commuting_diagram(mesh, sol.stress, sol.div_stress, k)


def property_suite(n: int = 4, seed: int = 0) -> list[CheckResult]:
    """Patch test, structure and projector checks on every family, plus the
    commuting-diagram check on a Voronoi mesh."""
    out = []
    for fam in MeshFamily:
        mesh = generate_mesh(fam, n, seed=seed)
        es, eu = patch_test(mesh)
        out.append(_le(f"patch stress {fam.value}", es, 1e-9))
        out.append(_le(f"patch displacement {fam.value}", eu, 1e-10))
        for k in (1, 2):
            rep = structure_report(mesh, k)
            out.append(CheckResult(f"dof counts {fam.value} k={k}", float(not rep["counts"]), 0.0,
                                   rep["counts"]))
            out.append(CheckResult(f"Ah SPD {fam.value} k={k}", rep["min_ah"], 0.0, rep["min_ah"] > 0))
            out.append(CheckResult(f"Se PSD {fam.value} k={k}", rep["min_se"], -1e-10,
                                   rep["min_se"] >= -1e-10))
            out.append(CheckResult(f"B full rank {fam.value} k={k}", rep["min_sv"], 0.0,
                                   rep["rank"] == rep["rows"], f"rank {rep['rank']}/{rep['rows']}"))
            out.append(_le(f"projector {fam.value} k={k}",
                           projector_consistency(mesh, k, seed=seed), 1e-10))
    for k in (1, 2):
        out.append(_le(f"commuting diagram PolyU n=8 k={k}", commuting_gap(k, seed=seed), 1e-10))
    return out
