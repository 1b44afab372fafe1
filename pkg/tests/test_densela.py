import numpy as np
import pytest
from scipy import linalg

from satlab import densela


def _spd(n, rng):
    A = rng.standard_normal((n, n))
    return A @ A.T + n * np.eye(n)


def test_solve_spd_matches_lstsq():
    rng = np.random.default_rng(0)
    A = _spd(12, rng)
    b = rng.standard_normal((12, 3))
    assert np.allclose(densela.solve_spd(A, b), np.linalg.lstsq(A, b, rcond=None)[0])


def test_not_pd_and_asymmetric():
    with pytest.raises(densela.NotPD):
        densela.cholesky(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        densela.as_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        densela.as_sym(np.ones((2, 3)))


def test_eig_gsym_max_against_eigh():
    rng = np.random.default_rng(1)
    N, D = _spd(9, rng), _spd(9, rng)
    lam, v = densela.eig_gsym_max(N, D)
    assert lam == pytest.approx(linalg.eigh(N, D, eigvals_only=True)[-1], rel=1e-12)
    assert v @ D @ v == pytest.approx(1.0)
    assert np.allclose(N @ v, lam * D @ v)


def test_kkt_minimizer():
    # min x^T A x / 2 - f^T x subject to C^T x = g, via the null-space method
    rng = np.random.default_rng(2)
    A = _spd(10, rng)
    C = rng.standard_normal((10, 3))
    f, g = rng.standard_normal(10), rng.standard_normal(3)
    x, mu = densela.solve_kkt(A, C, f, g)
    x0 = np.linalg.lstsq(C.T, g, rcond=None)[0]
    Z = linalg.null_space(C.T)
    y = np.linalg.solve(Z.T @ A @ Z, Z.T @ (f - A @ x0))
    assert np.allclose(x, x0 + Z @ y)
    assert np.allclose(A @ x + C @ mu, f)


def test_kkt_multi_rhs_and_homogeneous():
    rng = np.random.default_rng(3)
    A = _spd(6, rng)
    c = np.ones(6)
    F = rng.standard_normal((6, 4))
    X, _ = densela.solve_kkt(A, c, F, None)
    assert X.shape == (6, 4)
    assert np.allclose(c @ X, 0.0)
    for k in range(4):
        xk, _ = densela.solve_kkt(A, c, F[:, k], np.zeros(1))
        assert np.allclose(X[:, k], xk)


def test_kkt_singular():
    A = np.eye(3)
    C = np.column_stack([np.ones(3), np.ones(3)])
    with pytest.raises(densela.Singular):
        densela.solve_kkt(A, C, np.ones(3), np.array([1.0, 2.0]))
