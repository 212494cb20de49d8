import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import gl01, triangle_monomial
from qtdg.errors import DegenerateElement
from qtdg.quadrature import (duffy_triangle, element_rule, facet_rule, gauss_legendre,
                             map_to_simplex)


def test_gl_small_cases():
    r = gauss_legendre(1)
    assert r.nodes[:, 0] == pytest.approx([0.5]) and r.weights == pytest.approx([1.0])
    r = gauss_legendre(2)
    s3 = np.sqrt(3.0)
    assert sorted(r.nodes[:, 0]) == pytest.approx([(3 - s3) / 6, (3 + s3) / 6], abs=1e-15)
    assert r.weights == pytest.approx([0.5, 0.5], abs=1e-15)
    r = gauss_legendre(3)
    assert r.weights @ r.nodes[:, 0] ** 5 == pytest.approx(1 / 6, abs=1e-15)


@pytest.mark.parametrize("n", range(1, 31))
def test_gl_matches_numpy_reference(n):
    x, w = gl01(n)
    r = gauss_legendre(n)
    order = np.argsort(r.nodes[:, 0])
    assert np.allclose(r.nodes[order, 0], x, atol=1e-14)
    assert np.allclose(r.weights[order], w, atol=1e-14)


@pytest.mark.parametrize("n", range(1, 16))
def test_gl_exact_to_degree_2n_minus_1(n):
    r = gauss_legendre(n)
    for k in range(2 * n):
        assert abs(r.weights @ r.nodes[:, 0] ** k - 1 / (k + 1)) <= 1e-13


def test_gl_range_is_enforced():
    with pytest.raises(ValueError):
        gauss_legendre(0)
    with pytest.raises(ValueError):
        gauss_legendre(31)


@pytest.mark.parametrize("n", range(1, 8))
def test_duffy_basic(n):
    r = duffy_triangle(n)
    assert r.n_points == n * n
    assert r.weights.sum() == pytest.approx(0.5, abs=1e-15)
    assert np.all(r.weights > 0)
    x, y = r.nodes.T
    assert np.all((x >= 0) & (y >= 0) & (x + y <= 1 + 1e-15))


def test_duffy_examples():
    r = duffy_triangle(2)
    assert r.weights @ r.nodes[:, 0] == pytest.approx(1 / 6, abs=1e-15)
    r = duffy_triangle(4)
    assert r.weights @ (r.nodes[:, 0] ** 2 * r.nodes[:, 1] ** 2) == pytest.approx(1 / 180, abs=1e-15)


@pytest.mark.parametrize("n", range(1, 7))
def test_duffy_exact_to_degree_2n_minus_2(n):
    # the collapsed direction carries an extra (1 - u) factor
    r = duffy_triangle(n)
    x, y = r.nodes.T
    for a in range(2 * n - 1):
        for b in range(2 * n - 1 - a):
            ref = float(triangle_monomial(a, b))
            assert abs(r.weights @ (x ** a * y ** b) - ref) <= 1e-12 * ref


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0, 6.2))
def test_map_to_triangle_preserves_area(x0, y0, a, b, angle):
    R = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    verts = np.array([[x0, y0], [x0, y0], [x0, y0]]) + np.array([[0, 0], [a, 0], [0, b]]) @ R.T
    pts, w = map_to_simplex(element_rule(2, 3), verts)
    assert w.sum() == pytest.approx(0.5 * a * b, rel=1e-12)
    # integral of x over the triangle equals area times centroid
    assert w @ pts[:, 0] == pytest.approx(0.5 * a * b * verts[:, 0].mean(), rel=1e-10, abs=1e-12)


def test_map_examples():
    ref = np.array([[0, 0], [1, 0], [0, 1.0]])
    pts, w = map_to_simplex(duffy_triangle(3), ref)
    assert np.allclose(pts, duffy_triangle(3).nodes) and np.allclose(w, duffy_triangle(3).weights)
    _, w = map_to_simplex(duffy_triangle(3), [[0, 0], [0.5, 0], [0.5, 0.5]])
    assert w.sum() == pytest.approx(1 / 8)
    _, w = map_to_simplex(facet_rule(2, 2), [[0, 0], [0, 0.5]])
    assert w.sum() == pytest.approx(0.5)


def test_batched_map_matches_single():
    verts = np.random.default_rng(1).random((5, 3, 2))
    P, W = map_to_simplex(element_rule(2, 3), verts)
    for k in range(5):
        p, w = map_to_simplex(element_rule(2, 3), verts[k])
        assert np.allclose(P[k], p) and np.allclose(W[k], w)


def test_degenerate_triangle_raises():
    with pytest.raises(DegenerateElement):
        map_to_simplex(element_rule(2, 2), [[0, 0], [1, 1], [2, 2]])


@pytest.mark.parametrize("n", range(1, 8))
def test_facet_rule_exactness_along_segment(n):
    p0, p1 = np.array([0.2, 0.1]), np.array([0.7, 0.5])
    pts, w = map_to_simplex(facet_rule(2, n), np.array([p0, p1]))
    L = np.linalg.norm(p1 - p0)
    t = (pts - p0) @ (p1 - p0) / L ** 2
    for k in range(2 * n):
        assert abs(w @ t ** k - L / (k + 1)) <= 1e-13


def test_rules_are_immutable():
    r = gauss_legendre(4)
    with pytest.raises(ValueError):
        r.nodes[0, 0] = 1.0
