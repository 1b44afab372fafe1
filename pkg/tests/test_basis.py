import numpy as np
import pytest
from scipy import special

from satlab.basis import (
    EdgeMask,
    build_space,
    dim_p,
    dubiner_eval,
    dubiner_stiffness,
    edge_trace_matrix,
    jacobi_normalized,
    jacobi_normalized_deriv,
    legendre_table,
)
from satlab.quadrature import gauss_jacobi, triangle_rule


@pytest.mark.parametrize("alpha,beta", [(0.0, 0.0), (1.0, 1.0), (5.0, 0.0), (2.0, 3.0)])
def test_jacobi_orthonormal(alpha, beta):
    n = 12
    r = gauss_jacobi(n + 2, alpha, beta)
    P = jacobi_normalized(n, alpha, beta, r.nodes)
    G = (P * r.weights) @ P.T
    assert np.allclose(G, np.eye(n + 1), atol=1e-12)


def test_jacobi_matches_scipy_up_to_scale():
    x = np.linspace(-0.9, 0.9, 7)
    P = jacobi_normalized(6, 1.0, 2.0, x)
    for k in range(7):
        ref = special.eval_jacobi(k, 1.0, 2.0, x)
        ratio = P[k] / ref
        assert np.allclose(ratio, ratio[0])


def test_jacobi_derivative_by_differences():
    x = np.linspace(-0.8, 0.8, 9)
    h = 1e-6
    d = jacobi_normalized_deriv(8, 1.0, 1.0, x)
    fd = (jacobi_normalized(8, 1.0, 1.0, x + h) - jacobi_normalized(8, 1.0, 1.0, x - h)) / (2 * h)
    assert np.allclose(d, fd, atol=1e-5)


def test_legendre_high_degree_stable():
    x = np.linspace(-1, 1, 11)
    P = legendre_table(2000, x)
    assert np.all(np.isfinite(P))
    # |l_n(1)| = sqrt(n + 1/2)
    assert P[2000, -1] == pytest.approx(np.sqrt(2000.5))


@pytest.mark.parametrize("r", [0, 3, 9])
def test_dubiner_orthonormal(r):
    rule = triangle_rule(2 * r)
    V = dubiner_eval(r, *rule.nodes.T)
    assert V.shape[1] == dim_p(r)
    assert np.allclose((V * rule.weights[:, None]).T @ V, np.eye(dim_p(r)), atol=1e-12)


def test_dubiner_hierarchical_and_constant():
    rule = triangle_rule(4)
    V4 = dubiner_eval(4, *rule.nodes.T)
    V2 = dubiner_eval(2, *rule.nodes.T)
    assert np.allclose(V4[:, : dim_p(2)], V2)
    assert np.allclose(V4[:, 0], 1 / np.sqrt(2))


def test_dubiner_gradients_by_differences():
    rng = np.random.default_rng(0)
    x = rng.uniform(-0.9, -0.1, 20)
    y = rng.uniform(-0.9, 0, 20) * (1 + x) - x - 1 + 0.05
    y = np.minimum(y, -x - 0.05)
    h = 1e-6
    _, Vx, Vy = dubiner_eval(6, x, y, grad=True)
    fx = (dubiner_eval(6, x + h, y) - dubiner_eval(6, x - h, y)) / (2 * h)
    fy = (dubiner_eval(6, x, y + h) - dubiner_eval(6, x, y - h)) / (2 * h)
    assert np.allclose(Vx, fx, atol=1e-5) and np.allclose(Vy, fy, atol=1e-5)


def test_stiffness_matches_quadrature():
    r = 7
    rule = triangle_rule(2 * r)
    _, Vx, Vy = dubiner_eval(r, *rule.nodes.T, grad=True)
    K = (Vx * rule.weights[:, None]).T @ Vx + (Vy * rule.weights[:, None]).T @ Vy
    assert np.allclose(dubiner_stiffness(r), K, atol=1e-11)
    # a smaller request reuses a leading block
    assert np.allclose(dubiner_stiffness(3), K[: dim_p(3), : dim_p(3)], atol=1e-11)


@pytest.mark.parametrize("edge", [1, 2, 3])
def test_edge_trace_moments(edge):
    # the traces of degree-r functions on an edge have at most r + 1 moments
    r = 5
    T = edge_trace_matrix(r, edge, r + 3)
    assert np.allclose(T[:, r + 1:], 0.0, atol=1e-12)
    assert T.shape == (dim_p(r), r + 4)


@pytest.mark.parametrize("r,mask,dim", [
    (1, (True, True, False), None),      # only the zero polynomial vanishes on two edges
    (1, (False, False, True), 1),
    (1, (True, False, True), None),
    (2, (True, False, True), 1),
    (5, (True, False, False), dim_p(5) - 6),
    (5, (True, False, True), dim_p(5) - 11),
    (5, (True, True, True), dim_p(2)),
])
def test_constrained_dimensions(r, mask, dim):
    if dim is None:
        with pytest.raises(ValueError):
            build_space(r, EdgeMask(*mask))
        return
    assert build_space(r, EdgeMask(*mask)).dim == dim


def test_constrained_space_vanishes_and_is_orthonormal():
    S = build_space(6, EdgeMask(True, False, True))
    rule = triangle_rule(12)
    V = S.eval(*rule.nodes.T)
    assert np.allclose((V * rule.weights[:, None]).T @ V, np.eye(S.dim), atol=1e-12)
    t = np.linspace(-1, 1, 9)
    assert np.allclose(S.eval(t, -np.ones_like(t)), 0.0, atol=1e-12)
    assert np.allclose(S.eval(t, -t), 0.0, atol=1e-12)
    # stiffness in the constrained basis equals quadrature of gradients
    V, Vx, Vy = S.tables(rule)
    K = (Vx * rule.weights[:, None]).T @ Vx + (Vy * rule.weights[:, None]).T @ Vy
    assert np.allclose(S.K, K, atol=1e-10)


def test_space_roundtrip():
    S = build_space(4, EdgeMask(False, True, False))
    c = np.random.default_rng(1).standard_normal(S.dim)
    assert np.allclose(S.from_dubiner(S.to_dubiner(c)), c)


def test_mean_zero_space():
    S = build_space(3, mean_zero=True)
    assert S.dim == dim_p(3) and S.mean_constraint[0] == pytest.approx(np.sqrt(2))
    with pytest.raises(ValueError):
        build_space(3, EdgeMask(True, False, False), mean_zero=True)
