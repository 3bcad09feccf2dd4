"""Polygonal meshes of the unit square.

A :class:`PolygonMesh` stores vertex coordinates and counter-clockwise
vertex loops.  Edges are derived from the loops; each edge carries a global
orientation from its lower to its higher vertex id, and its global normal is
that tangent rotated clockwise.  ``cell_signs[c][i]`` is +1 when the outward
normal of cell ``c`` on its ``i``-th local edge equals the global normal.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import Voronoi, cKDTree

from .quadrature import fan_rule


class MeshFamily(str, enum.Enum):
    TriS = "TriS"
    QuadS = "QuadS"
    HexS = "HexS"
    ConcQuadS = "ConcQuadS"
    TriU = "TriU"
    QuadU = "QuadU"
    PolyU = "PolyU"
    ConcHexU = "ConcHexU"

    @property
    def structured(self) -> bool:
        return self.value.endswith("S")


class MeshError(ValueError):
    pass


def _shoelace(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 * d2 < 0 and d3 * d4 < 0:
        return True

    def on_segment(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    scale = max(np.ptp([p1[0], p2[0], q1[0], q2[0]]), np.ptp([p1[1], p2[1], q1[1], q2[1]]), 1e-300)
    eps = 1e-14 * scale * scale
    if abs(d1) <= eps and on_segment(q1, q2, p1):
        return True
    if abs(d2) <= eps and on_segment(q1, q2, p2):
        return True
    if abs(d3) <= eps and on_segment(p1, p2, q1):
        return True
    if abs(d4) <= eps and on_segment(p1, p2, q2):
        return True
    return False


def is_simple_polygon(v: np.ndarray) -> bool:
    """True if no two non-adjacent edges of the closed loop touch."""
    n = len(v)
    if n < 3:
        return False
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_cross(a, b, v[j], v[(j + 1) % n]):
                return False
    return True


def chebyshev_kernel_center(v: np.ndarray) -> tuple[np.ndarray, float]:
    """Center and radius of the largest disc inside the kernel of a CCW polygon.

    The kernel is the intersection of the inner half-planes of all edges;
    a radius of zero (or less) means the polygon is not star-shaped with
    respect to any disc.
    """
    w = np.roll(v, -1, axis=0)
    t = w - v
    L = np.linalg.norm(t, axis=1)
    keep = L > 0
    n_out = np.column_stack([t[:, 1], -t[:, 0]])[keep] / L[keep, None]
    b = np.einsum("ij,ij->i", n_out, v[keep])
    A = np.column_stack([n_out, np.ones(len(n_out))])
    res = linprog([0.0, 0.0, -1.0], A_ub=A, b_ub=b,
                  bounds=[(None, None), (None, None), (None, None)], method="highs")
    if res.status != 0:
        return np.mean(v, axis=0), 0.0
    return np.asarray(res.x[:2]), float(res.x[2])


@dataclass(frozen=True)
class CellGeometry:
    vertices: np.ndarray
    centroid: np.ndarray
    area: float
    diameter: float
    second_moment: float
    star_center: np.ndarray

    @property
    def fan_triangles(self) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        v = self.vertices
        return [(self.star_center, v[i], v[(i + 1) % len(v)]) for i in range(len(v))]


def polygon_geometry(vertices) -> CellGeometry:
    """Area, centroid, diameter, second moment and fan center of a CCW polygon."""
    v = np.asarray(vertices, dtype=float)
    area = _shoelace(v)
    if not area > 0.0:
        raise MeshError(f"degenerate or clockwise cell (signed area {area:g})")
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    centroid = np.array([np.sum((x + xn) * cross), np.sum((y + yn) * cross)]) / (6.0 * area)
    diff = v[:, None, :] - v[None, :, :]
    diameter = float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", diff, diff))))

    # centroid is a valid fan center when it sees every edge from strictly inside
    t = np.roll(v, -1, axis=0) - v
    L = np.linalg.norm(t, axis=1)
    n_out = np.column_stack([t[:, 1], -t[:, 0]]) / np.where(L > 0, L, 1.0)[:, None]
    dist = np.einsum("ij,ij->i", n_out, v - centroid)
    if np.all(dist[L > 0] > 1e-8 * diameter):
        star = centroid
    else:
        star, radius = chebyshev_kernel_center(v)
        if radius <= 1e-10 * diameter:
            raise MeshError("cell is not star-shaped")

    rule = fan_rule(star - centroid, v - centroid, 2)
    second_moment = float(rule.integrate(np.sum(rule.points ** 2, axis=1)))
    return CellGeometry(v, centroid, area, diameter, second_moment, star)


@dataclass(frozen=True, eq=False)
class PolygonMesh:
    vertices: np.ndarray
    cells: tuple[np.ndarray, ...]
    edges: np.ndarray = field(init=False, repr=False)
    edge_cells: np.ndarray = field(init=False, repr=False)
    boundary: np.ndarray = field(init=False, repr=False)
    cell_edges: tuple[np.ndarray, ...] = field(init=False, repr=False)
    cell_signs: tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2:
            raise MeshError("vertices must be an (n, 2) array")
        verts.flags.writeable = False
        cells = []
        for c, loop in enumerate(self.cells):
            loop = np.array(loop, dtype=np.int64)
            if loop.ndim != 1 or len(loop) < 3:
                raise MeshError(f"cell {c}: needs at least 3 vertices")
            if loop.min() < 0 or loop.max() >= len(verts):
                raise MeshError(f"cell {c}: dangling vertex id")
            if len(set(loop.tolist())) != len(loop):
                raise MeshError(f"cell {c}: repeated vertex")
            pts = verts[loop]
            if not is_simple_polygon(pts):
                raise MeshError(f"cell {c}: self-intersecting vertex loop")
            if _shoelace(pts) <= 0.0:
                raise MeshError(f"cell {c}: vertex loop is not counter-clockwise")
            loop.flags.writeable = False
            cells.append(loop)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "cells", tuple(cells))

        index: dict[tuple[int, int], int] = {}
        edges: list[tuple[int, int]] = []
        incident: list[list[int]] = []
        cell_edges, cell_signs = [], []
        for c, loop in enumerate(cells):
            ids = np.empty(len(loop), dtype=np.int64)
            signs = np.empty(len(loop), dtype=np.int64)
            for i, a in enumerate(loop.tolist()):
                b = int(loop[(i + 1) % len(loop)])
                key = (min(a, b), max(a, b))
                e = index.get(key)
                if e is None:
                    e = index[key] = len(edges)
                    edges.append(key)
                    incident.append([])
                incident[e].append(c)
                ids[i] = e
                signs[i] = 1 if a < b else -1
            ids.flags.writeable = False
            signs.flags.writeable = False
            cell_edges.append(ids)
            cell_signs.append(signs)
        edge_cells = np.full((len(edges), 2), -1, dtype=np.int64)
        for e, inc in enumerate(incident):
            if len(inc) > 2:
                raise MeshError(f"edge {edges[e]} shared by more than two cells")
            edge_cells[e, : len(inc)] = inc
        object.__setattr__(self, "edges", np.array(edges, dtype=np.int64).reshape(-1, 2))
        object.__setattr__(self, "edge_cells", edge_cells)
        object.__setattr__(self, "boundary", edge_cells[:, 1] < 0)
        object.__setattr__(self, "cell_edges", tuple(cell_edges))
        object.__setattr__(self, "cell_signs", tuple(cell_signs))

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @cached_property
    def geometry(self) -> tuple[CellGeometry, ...]:
        return tuple(polygon_geometry(self.vertices[loop]) for loop in self.cells)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.linalg.norm(d, axis=1)

    @cached_property
    def edge_normals(self) -> np.ndarray:
        """Unit global normals, tangent (low id -> high id) rotated clockwise."""
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.column_stack([d[:, 1], -d[:, 0]]) / self.edge_lengths[:, None]

    def cell_geometry(self, c: int) -> CellGeometry:
        return self.geometry[c]

    def __eq__(self, other):
        if not isinstance(other, PolygonMesh):
            return NotImplemented
        return (np.array_equal(self.vertices, other.vertices)
                and len(self.cells) == len(other.cells)
                and all(np.array_equal(a, b) for a, b in zip(self.cells, other.cells)))

    __hash__ = None


def compute_cell_geometry(mesh: PolygonMesh, cell: int) -> CellGeometry:
    return mesh.geometry[cell]


def mean_edge_length(mesh: PolygonMesh) -> float:
    if mesh.n_edges == 0:
        raise MeshError("empty mesh")
    return float(np.mean(mesh.edge_lengths))


# --------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    gamma: float
    c: float
    ball_ratio: np.ndarray
    vertex_ratio: np.ndarray

    @property
    def star_violations(self) -> np.ndarray:
        return np.flatnonzero(self.ball_ratio < self.gamma)

    @property
    def vertex_violations(self) -> np.ndarray:
        return np.flatnonzero(self.vertex_ratio < self.c)

    @property
    def ok(self) -> bool:
        return len(self.star_violations) == 0 and len(self.vertex_violations) == 0

    def summary(self) -> str:
        return (f"{len(self.ball_ratio)} cells; min star-ball/h_E = {self.ball_ratio.min():.3g} "
                f"(gamma={self.gamma}), min vertex distance/h_E = {self.vertex_ratio.min():.3g} "
                f"(c={self.c}); star-shape violations {len(self.star_violations)}, "
                f"vertex-distance violations {len(self.vertex_violations)}")


def validate_mesh(mesh: PolygonMesh, gamma: float = 0.1, c: float = 0.05) -> ValidationReport:
    """Per-cell shape-regularity ratios.

    A cell passes when it is star-shaped w.r.t. a ball of radius
    ``gamma * h_E`` and any two of its vertices are at least ``c * h_E`` apart.

    Never raises on violations; inspect the returned report.
    """
    if not (0 < gamma < 1 and 0 < c < 1):
        raise ValueError("gamma and c must lie in (0, 1)")
    ball = np.empty(mesh.n_cells)
    vdist = np.empty(mesh.n_cells)
    for i, loop in enumerate(mesh.cells):
        v = mesh.vertices[loop]
        diff = v[:, None, :] - v[None, :, :]
        d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        h = d.max()
        _, r = chebyshev_kernel_center(v)
        ball[i] = max(r, 0.0) / h
        vdist[i] = d[~np.eye(len(v), dtype=bool)].min() / h
    return ValidationReport(gamma, c, ball, vdist)


# --------------------------------------------------------------------------
# generators


def _grid(n: int, jitter: float = 0.0, rng=None) -> np.ndarray:
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x)  # vertex id = j*(n+1) + i
    pts = np.column_stack([X.ravel(), Y.ravel()])
    if jitter:
        interior = ((pts > 0.0) & (pts < 1.0)).all(axis=1)
        pts[interior] += rng.uniform(-jitter, jitter, size=(interior.sum(), 2)) / n
    return pts


def _quads(n: int) -> list[list[int]]:
    vid = lambda i, j: j * (n + 1) + i  # noqa: E731
    return [[vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
            for j in range(n) for i in range(n)]


def _split(quads: list[list[int]], flip=None) -> list[list[int]]:
    tris = []
    for q, (a, b, c, d) in enumerate(quads):
        if flip is not None and flip[q]:
            tris += [[a, b, d], [b, c, d]]
        else:
            tris += [[a, b, c], [a, c, d]]
    return tris


def _merge_close(pts: np.ndarray, cells: list[list[int]], tol: float):
    """Identify vertices closer than ``tol``, drop unused ones, renumber."""
    parent = np.arange(len(pts))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in sorted(cKDTree(pts).query_pairs(tol)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(len(pts))])
    new_cells = []
    for loop in cells:
        out = []
        for v in (int(roots[i]) for i in loop):
            if not out or out[-1] != v:
                out.append(v)
        while len(out) > 1 and out[0] == out[-1]:
            out.pop()
        new_cells.append(out)
    used = sorted({v for loop in new_cells for v in loop})
    renum = {old: new for new, old in enumerate(used)}
    return pts[used], [[renum[v] for v in loop] for loop in new_cells]


def _on_boundary(p: np.ndarray) -> np.ndarray:
    return np.sum((np.abs(p) < 1e-12) | (np.abs(p - 1.0) < 1e-12), axis=-1)


def _collapse_short_edges(pts: np.ndarray, cells: list[list[int]], frac: float):
    """Contract edges shorter than ``frac`` times the diameter of a cell owning them.

    Each pass contracts a vertex-disjoint set of edges, shortest first; the
    merged vertex is the midpoint, or the endpoint pinned to the square's
    boundary (corners win over sides).
    """
    pts = pts.copy()
    for _ in range(20):
        cand = []
        for loop in cells:
            v = pts[loop]
            diff = v[:, None, :] - v[None, :, :]
            h = np.sqrt(np.max(np.einsum("ijk,ijk->ij", diff, diff)))
            for i, a in enumerate(loop):
                b = loop[(i + 1) % len(loop)]
                L = np.linalg.norm(pts[a] - pts[b])
                if L < frac * h:
                    cand.append((L, min(a, b), max(a, b)))
        if not cand:
            break
        parent = np.arange(len(pts))
        touched = set()
        for _, a, b in sorted(set(cand)):
            if a in touched or b in touched:
                continue
            ka, kb = _on_boundary(pts[a]), _on_boundary(pts[b])
            if ka and kb and ka == kb == 1 and not np.any(np.abs(pts[a] - pts[b]) < 1e-12):
                continue  # endpoints on different sides
            pts[a] = pts[a] if ka > kb else pts[b] if kb > ka else 0.5 * (pts[a] + pts[b])
            parent[b] = a
            touched.update((a, b))
        new_cells = []
        for loop in cells:
            out = []
            for v in (int(parent[i]) for i in loop):
                if not out or out[-1] != v:
                    out.append(v)
            while len(out) > 1 and out[0] == out[-1]:
                out.pop()
            if len(out) < 3:
                raise MeshError("edge collapse removed a cell")
            new_cells.append(out)
        cells = new_cells
    used = sorted({v for loop in cells for v in loop})
    renum = {old: new for new, old in enumerate(used)}
    return pts[used], [[renum[v] for v in loop] for loop in cells]


def _clipped_voronoi(seeds: np.ndarray) -> tuple[np.ndarray, list[list[int]]]:
    """Voronoi tessellation of the seeds restricted to the unit square.

    Reflecting the seeds across the four sides makes the square's sides
    Voronoi bisectors, so the regions of the original seeds tile the square.
    """
    s = np.asarray(seeds, dtype=float)
    mirrored = [s,
                np.column_stack([-s[:, 0], s[:, 1]]),
                np.column_stack([2.0 - s[:, 0], s[:, 1]]),
                np.column_stack([s[:, 0], -s[:, 1]]),
                np.column_stack([s[:, 0], 2.0 - s[:, 1]])]
    vor = Voronoi(np.vstack(mirrored))
    pts = vor.vertices.copy()
    for val in (0.0, 1.0):
        pts[np.abs(pts - val) < 1e-10] = val
    cells = []
    for i in range(len(s)):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or len(region) < 3:
            raise MeshError("unbounded Voronoi region inside the square")
        p = pts[region]
        ang = np.arctan2(p[:, 1] - s[i, 1], p[:, 0] - s[i, 0])
        cells.append([region[j] for j in np.argsort(ang, kind="stable")])
    scale = 1.0 / np.sqrt(len(s))
    return _merge_close(pts, cells, 1e-9 * scale)


def _lloyd(seeds: np.ndarray, iterations: int) -> np.ndarray:
    for _ in range(iterations):
        pts, cells = _clipped_voronoi(seeds)
        seeds = np.array([polygon_geometry(pts[c]).centroid for c in cells])
    return seeds


def _hex_lattice(n: int) -> tuple[np.ndarray, list[tuple[int, int]]]:
    # square row spacing keeps side-wall seeds away from cocircular configurations
    seeds, index = [], []
    for j in range(n):
        y = (j + 0.5) / n
        xs = [(i + 0.5) / n for i in range(n)] if j % 2 == 0 else [i / n for i in range(1, n)]
        for i, x in enumerate(xs):
            seeds.append((x, y))
            index.append((i, j))
    return np.array(seeds), index


def _push_top_vertices(pts: np.ndarray, cells: list[list[int]], index, n: int) -> np.ndarray:
    """Make selected interior cells concave by pushing their top vertex inward.

    The top vertex moves past the chord joining its two neighbours by 20% of
    its distance to that chord, leaving a single reflex vertex.
    """
    pts = pts.copy()
    moved: set[int] = set()
    on_boundary = ((pts <= 0.0) | (pts >= 1.0)).any(axis=1)
    for c, loop in enumerate(cells):
        i, j = index[c]
        if j % 2 or i % 2 or any(on_boundary[v] for v in loop):
            continue
        ys = pts[loop, 1]
        k = int(np.argmax(ys))
        top = loop[k]
        prev, nxt = loop[k - 1], loop[(k + 1) % len(loop)]
        if {top, prev, nxt} & moved:
            continue
        mid = 0.5 * (pts[prev] + pts[nxt])
        pts[top] = pts[top] + 1.2 * (mid - pts[top])
        moved.add(top)
    return pts


def generate_mesh(family: MeshFamily | str, n: int, seed: int = 0) -> PolygonMesh:
    """Mesh of the unit square from one of the eight families.

    ``n`` is the number of cells per side (for Voronoi-based families, the
    number of seeds per row or per side).  Unstructured families depend on
    ``seed`` and are reproducible given it.
    """
    family = MeshFamily(family)
    if n < 2:
        raise MeshError(f"resolution n={n} too small for {family.value}")
    rng = np.random.default_rng(seed)

    if family is MeshFamily.QuadS:
        return PolygonMesh(_grid(n), _quads(n))
    if family is MeshFamily.TriS:
        return PolygonMesh(_grid(n), _split(_quads(n)))
    if family is MeshFamily.QuadU:
        return PolygonMesh(_grid(n, 0.2, rng), _quads(n))
    if family is MeshFamily.TriU:
        pts = _grid(n, 0.2, rng)
        return PolygonMesh(pts, _split(_quads(n), rng.integers(0, 2, size=n * n)))
    if family is MeshFamily.ConcQuadS:
        pts = _grid(n)
        h = 1.0 / n
        for j in range(1, n, 2):
            for i in range(1, n, 2):
                sx = 1.0 if (i // 2 + j // 2) % 2 == 0 else -1.0
                # 0.3 of the 2x2 macro cell, i.e. 0.6 h per coordinate
                pts[j * (n + 1) + i] += 0.6 * h * np.array([sx, 1.0])
        return PolygonMesh(pts, _quads(n))
    if family is MeshFamily.HexS:
        seeds, _ = _hex_lattice(n)
        return PolygonMesh(*_clipped_voronoi(seeds))
    if family is MeshFamily.ConcHexU:
        seeds, index = _hex_lattice(n)
        seeds = seeds + rng.uniform(-0.05, 0.05, size=seeds.shape) / n
        pts, cells = _clipped_voronoi(seeds)
        return PolygonMesh(_push_top_vertices(pts, cells, index, n), cells)
    if family is MeshFamily.PolyU:
        seeds = _lloyd(rng.uniform(0.0, 1.0, size=(n * n, 2)), 2)
        return PolygonMesh(*_collapse_short_edges(*_clipped_voronoi(seeds), 0.1))
    raise MeshError(f"unknown family {family}")


# --------------------------------------------------------------------------
# file format


def mesh_to_dict(mesh: PolygonMesh) -> dict:
    return {"vertices": [[float(x), float(y)] for x, y in mesh.vertices],
            "cells": [loop.tolist() for loop in mesh.cells]}


def mesh_from_dict(doc) -> PolygonMesh:
    if not isinstance(doc, dict) or "vertices" not in doc or "cells" not in doc:
        raise MeshError("mesh document needs 'vertices' and 'cells'")
    try:
        verts = np.array(doc["vertices"], dtype=float)
        cells = [[int(i) for i in loop] for loop in doc["cells"]]
    except (TypeError, ValueError) as exc:
        raise MeshError(f"malformed mesh document: {exc}") from exc
    if verts.ndim != 2 or verts.shape[1] != 2:
        raise MeshError("vertices must be pairs [x, y]")
    return PolygonMesh(verts, cells)


def write_mesh(mesh: PolygonMesh, path) -> None:
    # repr(float) is the shortest round-tripping form (at most 17 significant digits)
    verts = ",\n    ".join(f"[{x!r}, {y!r}]" for x, y in mesh.vertices.tolist())
    cells = ",\n    ".join(json.dumps(loop.tolist()) for loop in mesh.cells)
    Path(path).write_text(f'{{\n  "vertices": [\n    {verts}\n  ],\n  "cells": [\n    {cells}\n  ]\n}}\n',
                          encoding="utf-8")


def read_mesh(path) -> PolygonMesh:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MeshError(f"malformed mesh file {path}: {exc}") from exc
    return mesh_from_dict(doc)
