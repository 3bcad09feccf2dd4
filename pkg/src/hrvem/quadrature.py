"""Quadrature on edges, triangles and polygons.

Triangle rules are built by collapsing a tensor Gauss rule onto the
reference triangle (Duffy map), using a Gauss-Jacobi rule in the collapsed
direction so that every weight is positive.  Polygon rules are unions of
mapped triangle rules over a fan triangulation.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_GAUSS_POINTS = 20
MAX_TRIANGLE_DEGREE = 20


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if len(self.points) != len(self.weights):
            raise ValueError("points and weights differ in length")

    def integrate(self, values) -> float | np.ndarray:
        """Contract ``values`` (first axis over points) against the weights."""
        return np.tensordot(self.weights, values, axes=(0, 0))


@lru_cache(maxsize=None)
def _gauss_1d(n_points: int):
    s, w = np.polynomial.legendre.leggauss(n_points)
    s.flags.writeable = False
    w.flags.writeable = False
    return s, w


def gauss_1d(n_points: int) -> QuadratureRule:
    """Gauss-Legendre rule on [-1, 1], exact to degree ``2*n_points - 1``."""
    if not 1 <= n_points <= MAX_GAUSS_POINTS:
        raise ValueError(f"n_points must lie in [1, {MAX_GAUSS_POINTS}], got {n_points}")
    s, w = _gauss_1d(n_points)
    return QuadratureRule(s, w)


@lru_cache(maxsize=None)
def _triangle(degree: int):
    n = degree // 2 + 1
    # x direction carries the (1 - eta) Jacobian of the collapse
    a, wa = roots_jacobi(n, 1.0, 0.0)
    b, wb = _gauss_1d(n)
    eta = (a + 1.0) / 2.0
    xi = (b + 1.0) / 2.0
    E, X = np.meshgrid(eta, xi, indexing="ij")
    pts = np.column_stack([(X * (1.0 - E)).ravel(), E.ravel()])
    # roots_jacobi weights integrate (1-a) over [-1,1]: rescale to (1-eta) on [0,1]
    W = np.outer(wa / 4.0, wb / 2.0).ravel()
    pts.flags.writeable = False
    W.flags.writeable = False
    return pts, W


def triangle_rule(degree: int) -> QuadratureRule:
    """Rule on the reference triangle (0,0), (1,0), (0,1) exact to ``degree``."""
    if not 0 <= degree <= MAX_TRIANGLE_DEGREE:
        raise ValueError(f"degree must lie in [0, {MAX_TRIANGLE_DEGREE}], got {degree}")
    pts, W = _triangle(degree)
    return QuadratureRule(pts, W)


def edge_rule(a, b, n_points: int) -> QuadratureRule:
    """Gauss rule mapped onto the segment from ``a`` to ``b``.

    The returned weights already include the length factor |b - a| / 2.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s, w = _gauss_1d(n_points)
    pts = a + np.outer((s + 1.0) / 2.0, b - a)
    return QuadratureRule(pts, w * np.linalg.norm(b - a) / 2.0)


def fan_rule(center, vertices, degree: int) -> QuadratureRule:
    """Union of triangle rules over the fan (center, v_i, v_{i+1})."""
    ref = triangle_rule(degree)
    center = np.asarray(center, dtype=float)
    v = np.asarray(vertices, dtype=float)
    w_next = np.roll(v, -1, axis=0)
    e1 = v - center
    e2 = w_next - center
    jac = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(jac <= 0.0):
        raise ValueError("degenerate or inverted fan triangle")
    # (ntri, npts, 2)
    pts = (center[None, None, :]
           + ref.points[None, :, 0, None] * e1[:, None, :]
           + ref.points[None, :, 1, None] * e2[:, None, :])
    weights = jac[:, None] * ref.weights[None, :]
    return QuadratureRule(pts.reshape(-1, 2), weights.ravel())


def polygon_rule(geom, degree: int) -> QuadratureRule:
    """Quadrature rule on a cell, exact for polynomials up to ``degree``."""
    return fan_rule(geom.star_center, geom.vertices, degree)


def monomial_moment(vertices, px: int, py: int) -> float:
    """Exact integral of x**px * y**py over a simple CCW polygon.

    Green's theorem turns the area integral into the boundary integral of
    x**(px+1) y**py / (px+1) dy, evaluated with an exact Gauss rule per edge.
    Internal cross-check for the fan rules.
    """
    v = np.asarray(vertices, dtype=float)
    w_next = np.roll(v, -1, axis=0)
    n = (px + py + 2) // 2 + 1
    s, w = _gauss_1d(n)
    t = (s + 1.0) / 2.0
    total = 0.0
    for a, b in zip(v, w_next):
        x = a[0] + t * (b[0] - a[0])
        y = a[1] + t * (b[1] - a[1])
        total += np.sum(w / 2.0 * x ** (px + 1) * y ** py) * (b[1] - a[1])
    return total / (px + 1)
