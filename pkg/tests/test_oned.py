import time

import numpy as np
import pytest

from satlab import oned


def closed_form(p):
    return (p * (p + 1) / ((p + 2) * (p + 3))) ** 2


@pytest.mark.parametrize("p", [1, 2, 5, 17, 100])
def test_fast_path_dense_and_closed_form(p):
    fast = oned.rho_squared(p)
    assert fast == pytest.approx(oned.rho_squared_dense(p), abs=1e-12)
    assert fast == pytest.approx(closed_form(p), abs=1e-12)


def test_kernel_vector_spans_left_kernel():
    for p in (3, 10, 40):
        v = oned.kernel_vector(p).astype(float)
        T = oned.coefficient_map(p)
        assert np.abs(v @ T).max() <= 1e-10 * np.abs(v).max()


def test_printed_recursion_differs():
    # the variant with the shifted beta index is not a kernel vector
    v = oned.kernel_vector(10, "printed").astype(float)
    assert np.abs(v @ oned.coefficient_map(10)).max() > 1e-3
    assert oned.rho_squared(10, "printed") == pytest.approx(0.5718949527, abs=1e-9)
    with pytest.raises(ValueError):
        oned.kernel_vector(3, "other")


@pytest.mark.parametrize("p", [2, 4, 8])
def test_sampling_lower_bound_reaches_fast_path(p):
    rho = np.sqrt(oned.rho_squared(p))
    sampled = oned.rho_by_sampling(p, n_samples=20_000, seed=p)
    assert sampled <= rho + 1e-9
    assert sampled == pytest.approx(rho, abs=1e-7)


def test_extremal_phi_attains_rho():
    p = 7
    inst = oned.rho_instance(p)
    phi = oned.phi_from_d(p, inst.d)
    assert oned.raw_quotient(p, phi) ** 2 == pytest.approx(inst.value, rel=1e-9)


def test_rho_increasing_towards_one():
    vals = [oned.rho_squared(p) for p in range(1, 201)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1 and oned.rho_squared(10_000) > 0.999


def test_fast_path_runtime_large_p():
    t0 = time.perf_counter()
    val = oned.rho_squared(10_000)
    assert time.perf_counter() - t0 < 1.0
    assert val == pytest.approx(closed_form(10_000), abs=1e-10)


def test_d_equals_T_c_pointwise():
    rng = np.random.default_rng(5)
    p = 9
    c = rng.standard_normal(p)
    x = np.linspace(-1, 1, 50)
    phi = oned.ell_prime_table(p, x) @ c
    d = oned.coefficient_map(p) @ c
    lhs = oned.ell_prime_table(p + 1, x) @ d
    assert np.allclose(lhs, (1 - x) * phi, atol=1e-11)


def test_point_functional_exact_at_q0():
    for p in (1, 3, 6):
        assert oned.point_functional_ratio(p, 0) == pytest.approx(1.0, abs=1e-12)


def test_element_ratio_and_energies():
    g = np.array([0.3, -1.0, 0.5])
    # -w'' = g has a polynomial solution of degree 4, so P_4 is exact
    assert oned.dirichlet_energy(4, g) == pytest.approx(oned.exact_dirichlet_energy(g), rel=1e-12)
    assert oned.dirichlet_energy(3, g) < oned.exact_dirichlet_energy(g)
    assert oned.element_saturation_ratio(3, g) == pytest.approx(1.0, abs=1e-12)
    assert oned.element_saturation_ratio(5, np.zeros(2)) == 1.0
    with pytest.raises(ValueError):
        oned.element_saturation_ratio(2, g)


def test_exact_energy_of_constant_source():
    # w = (1 - x^2)/2, |w'|^2 = int x^2 = 2/3
    assert oned.exact_dirichlet_energy([1.0]) == pytest.approx(2 / 3)


def test_star_constant_matches_rho():
    for p in (2, 5, 9):
        assert 1 - 1 / oned.star_constant(p, 1) == pytest.approx(oned.rho_squared(p), abs=1e-10)


def test_guards():
    with pytest.raises(ValueError):
        oned.rho_squared_dense(oned.DENSE_LIMIT + 1)
    with pytest.raises(ValueError):
        oned.rho_by_sampling(31)
    with pytest.raises(ValueError):
        oned.kernel_vector(0)
