from functools import lru_cache

import numpy as np
import pytest
import sympy as sp

from satlab.quadrature import (
    collapse,
    edge_rule,
    gauss_jacobi,
    gauss_legendre,
    points_for_degree,
    triangle_rule,
    uncollapse,
)

X, Y = sp.symbols("x y")


@lru_cache(maxsize=None)
def exact_monomial(a, b):
    # integral of x^a y^b over {x, y >= -1, x + y <= 0}
    return float(sp.integrate(sp.integrate(X**a * Y**b, (X, -1, -Y)), (Y, -1, 1)))


@pytest.mark.parametrize("order", [0, 1, 2, 5, 8, 13])
def test_triangle_rule_exact_on_monomials(order):
    rule = triangle_rule(order)
    x, y = rule.nodes.T
    for a in range(order + 1):
        for b in range(order + 1 - a):
            assert rule.integrate(x**a * y**b) == pytest.approx(exact_monomial(a, b), abs=1e-13)


def test_triangle_rule_area_and_nodes_inside():
    rule = triangle_rule(20)
    assert rule.weights.sum() == pytest.approx(2.0, abs=1e-14)
    x, y = rule.nodes.T
    assert np.all(x > -1) and np.all(y > -1) and np.all(x + y < 0)


def test_gauss_legendre_degree():
    for n in (1, 3, 9):
        r = gauss_legendre(n)
        for k in range(2 * n):
            exact = 0.0 if k % 2 else 2.0 / (k + 1)
            assert r.integrate(r.nodes**k) == pytest.approx(exact, abs=1e-14)


def test_gauss_jacobi_weight():
    # int (1 - x)^2 (1 + x) x^k against sympy
    r = gauss_jacobi(5, 2.0, 1.0)
    t = sp.Symbol("t")
    for k in range(10):
        exact = float(sp.integrate((1 - t) ** 2 * (1 + t) * t**k, (t, -1, 1)))
        assert r.integrate(r.nodes**k) == pytest.approx(exact, abs=1e-13)


def test_points_for_degree():
    assert [points_for_degree(d) for d in range(6)] == [1, 1, 2, 2, 3, 3]


def test_collapse_roundtrip_and_apex():
    rng = np.random.default_rng(1)
    a, b = rng.uniform(-1, 1, (2, 50))
    x, y = uncollapse(a, b)
    a2, b2 = collapse(x, y)
    assert np.allclose(a2, a) and np.allclose(b2, b)
    # the top vertex collapses to a = -1 without warnings
    assert collapse(-1.0, 1.0)[0] == -1.0


def test_edge_rule_length_and_parameter():
    t, pts, w = edge_rule(3, (1.0, -1.0), (-1.0, 1.0))
    assert w.sum() == pytest.approx(2 * np.sqrt(2))
    assert np.allclose(pts.sum(axis=1), 0.0)
    assert np.allclose(pts[:, 0], -t)


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        gauss_legendre(0)
    with pytest.raises(ValueError):
        gauss_jacobi(3, -1.0, 0.0)
    with pytest.raises(ValueError):
        triangle_rule(-1)
