import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrvem.mesh import polygon_geometry
from hrvem.quadrature import (edge_rule, fan_rule, gauss_1d, monomial_moment, polygon_rule,
                              triangle_rule)


def reference_triangle_moment(a, b):
    # int over {x, y >= 0, x + y <= 1} of x^a y^b = a! b! / (a + b + 2)!
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


@pytest.mark.parametrize("n", [1, 2, 5, 12, 20])
def test_gauss_exact_to_degree_2n_minus_1(n):
    rule = gauss_1d(n)
    for d in range(2 * n):
        exact = 0.0 if d % 2 else 2.0 / (d + 1)
        assert rule.integrate(rule.points ** d) == pytest.approx(exact, abs=1e-13)


@pytest.mark.parametrize("n", [0, 21])
def test_gauss_rejects_bad_counts(n):
    with pytest.raises(ValueError):
        gauss_1d(n)


@pytest.mark.parametrize("degree", [0, 1, 3, 6, 11, 20])
def test_triangle_rule_exactness(degree):
    rule = triangle_rule(degree)
    assert np.all(rule.weights > 0)
    x, y = rule.points.T
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            assert rule.integrate(x ** a * y ** b) == pytest.approx(reference_triangle_moment(a, b), rel=1e-12)


def test_triangle_rule_rejects_large_degree():
    with pytest.raises(ValueError):
        triangle_rule(21)


def test_edge_rule_length_and_linear_moment():
    a, b = np.array([0.2, 0.1]), np.array([1.0, 0.7])
    r = edge_rule(a, b, 3)
    assert r.integrate(np.ones(3)) == pytest.approx(1.0)
    # mean of x on the segment is its midpoint
    assert r.integrate(r.points[:, 0]) == pytest.approx(0.6 * 1.0)


def test_fan_rule_on_concave_cell_matches_green_moments(l_shape):
    geom = l_shape.geometry[0]
    rule = polygon_rule(geom, 6)
    x, y = rule.points.T
    v = l_shape.vertices
    for a in range(5):
        for b in range(5 - a):
            assert rule.integrate(x ** a * y ** b) == pytest.approx(monomial_moment(v, a, b), rel=1e-12)


def test_monomial_moment_unit_square():
    v = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    assert monomial_moment(v, 2, 3) == pytest.approx(1 / 12)


def test_fan_rule_rejects_inverted_triangle():
    v = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    with pytest.raises(ValueError):
        fan_rule(np.array([2.0, 0.5]), v, 2)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.3, 1.0), min_size=3, max_size=9),
       st.floats(0, 2 * np.pi), st.integers(0, 4), st.integers(0, 4))
def test_star_polygon_moments(radii, phase, a, b):
    n = len(radii)
    t = phase + 2 * np.pi * np.arange(n) / n
    v = np.column_stack([np.array(radii) * np.cos(t), np.array(radii) * np.sin(t)]) + 0.3
    geom = polygon_geometry(v)
    rule = polygon_rule(geom, a + b)
    x, y = rule.points.T
    ref = monomial_moment(v, a, b)
    assert rule.integrate(x ** a * y ** b) == pytest.approx(ref, rel=1e-10, abs=1e-13)
