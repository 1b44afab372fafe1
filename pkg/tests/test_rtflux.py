import numpy as np
import pytest

from satlab import reftri, rtflux
from satlab.basis import dim_p, dubiner_eval
from satlab.quadrature import triangle_rule
from satlab.reftri import Problem


@pytest.mark.parametrize("p", [0, 1, 2, 5])
def test_dimension_and_unisolvence(p):
    S = rtflux.rt_space(p)
    assert S.dim == rtflux.rt_dim(p) == (p + 1) * (p + 3)
    assert S.dof_matrix().shape == (S.dim, S.dim)
    assert S.unisolvence_condition() < 1e3


@pytest.mark.parametrize("p", [1, 3, 6])
def test_divergence_onto(p):
    S = rtflux.rt_space(p)
    assert np.linalg.matrix_rank(S.div) == dim_p(p)


def test_divergence_theorem():
    # int div sigma = sum_e int sigma . n ds for every basis field
    p = 3
    S = rtflux.rt_space(p)
    total_div = S.div[0] * np.sqrt(2.0)                     # r_0 = 1/sqrt(2)
    flux = sum(S.normal[e][0] * np.sqrt(2.0) * (rtflux.EDGE_LENGTHS[e] / 2) for e in (1, 2, 3))
    assert np.allclose(total_div, flux, atol=1e-12)


def test_rt_eval_divergence_by_differences():
    x, y = np.array([-0.5, -0.2]), np.array([-0.6, -0.3])
    h = 1e-6
    _, d = rtflux.rt_eval(3, x, y, div=True)
    fx = (rtflux.rt_eval(3, x + h, y)[:, :, 0] - rtflux.rt_eval(3, x - h, y)[:, :, 0]) / (2 * h)
    fy = (rtflux.rt_eval(3, x, y + h)[:, :, 1] - rtflux.rt_eval(3, x, y - h)[:, :, 1]) / (2 * h)
    assert np.allclose(d, fx + fy, atol=1e-6)


@pytest.mark.parametrize("p", [1, 2, 4])
def test_zero_trace_on_two_edges_fixes_third(p):
    # a divergence-free field with no flux through edges 1 and 2 has zero mean flux on edge 3
    S = rtflux.rt_space(p)
    B = np.vstack([S.div, S.normal[1], S.normal[2]])
    _, s, Vt = np.linalg.svd(B)
    null = Vt[np.sum(s > 1e-10):]
    assert np.allclose(S.normal[3][0] @ null.T, 0.0, atol=1e-10)


def _ratios(problem, p, n=4, seed=0):
    rng = np.random.default_rng(seed)
    E = reftri.galerkin_energy(problem, p, p + 20)
    out = []
    for _ in range(n):
        phi = rng.standard_normal(problem.source_dim(p))
        if problem is Problem.P1:
            res = rtflux.min_flux_p1(p, phi)
        elif problem is Problem.P2:
            res = rtflux.min_flux_p2(p, phi)
        else:
            res = rtflux.min_flux_p3(p, reftri.source_on_edges(problem, p, phi))
        assert res.residual < 1e-9
        out.append(res.norm / np.sqrt(phi @ E @ phi))
    return out


@pytest.mark.parametrize("problem", list(Problem))
@pytest.mark.parametrize("p", [1, 2, 5])
def test_flux_norm_bounds_dual_norm(problem, p):
    ratios = _ratios(problem, p)
    assert min(ratios) >= 1 - 1e-8
    assert max(ratios) < 3.0


def test_p1_flux_solves_constraints():
    p = 3
    phi = np.random.default_rng(1).standard_normal(dim_p(p - 1))
    norm, sigma = rtflux.min_flux_p1(p, phi)
    rule = triangle_rule(2 * p + 2)
    x, y = rule.nodes.T
    _, d = rtflux.rt_eval(p, x, y, div=True)
    target = rtflux.hat(x, y) * (dubiner_eval(p - 1, x, y) @ phi)
    assert np.allclose(d @ sigma, target, atol=1e-10)
    assert np.allclose(rtflux.rt_space(p).normal[rtflux.P1_FREE_EDGE] @ sigma, 0.0, atol=1e-12)
    assert norm > 0


def test_p3_compatibility_and_curl_space():
    p = 3
    C = rtflux.curl_space(p)
    assert C.dim == dim_p(p + 1) - 1 and C.div_norm < 1e-10
    bad = np.zeros((3, p + 1))
    bad[0, 0] = 1.0
    assert rtflux.compatibility_defect(bad) != 0
    with pytest.raises(rtflux.Incompatible):
        rtflux.min_flux_p3(p, bad)


def test_zero_data_and_shape_checks():
    assert rtflux.min_flux_p2(2, np.zeros(3)).norm == 0.0
    with pytest.raises(ValueError):
        rtflux.min_flux_p1(3, np.zeros(3))
    with pytest.raises(ValueError):
        rtflux.min_flux_p2(0, np.zeros(1))
