import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from pbrwp.exceptions import EstimationError, InvertibilityError, NotPositiveDefiniteError
from pbrwp.gaussian import (
    bures_wasserstein, conjugated_cov, contraction_diffusion_gap, contraction_factor,
    gaussian_trajectory, kernel_gaussian, kl_decay_rate_bound, kl_gaussians, max_t_check,
    norm_bound_threshold, pbrwp_cov_update, pbrwp_mean_update, prwpo_gaussian,
    stationary_covariance, step_size_bound, sym_inv_sqrt, sym_sqrt, w2_gaussians,
)
from pbrwp.kernel import ZMethod, kernel_density, log_z, log_z_exact_quadratic
from pbrwp.linalg import GaussianDist, SpdMatrix
from pbrwp.potentials import QuadraticPotential
from pbrwp.samplers import pbrwp_direction


def random_spd(rng, dim, low=0.5, high=2.0):
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    return (q * rng.uniform(low, high, dim)) @ q.T


def test_proximal_covariance_of_unit_case():
    tilde_mu, tilde_sigma = prwpo_gaussian([3.0], 1.0, 1.0, 1.0, 0.5, 1.0)
    assert tilde_sigma.entries[0, 0] == pytest.approx(10 / 9, abs=1e-12)
    assert tilde_mu[0] == pytest.approx(2.0, abs=1e-12)


def test_unit_case_stationary_point():
    s = stationary_covariance(1.0, 1.0, 0.5, 1.0).entries[0, 0]
    assert s == pytest.approx(0.75, abs=1e-12)
    _, tilde_sigma = prwpo_gaussian([0.0], s, 1.0, 1.0, 0.5, 1.0)
    assert tilde_sigma.entries[0, 0] == pytest.approx(1.0, abs=1e-12)
    for eta in [0.01, 0.1, 1.0]:
        assert pbrwp_cov_update(s, 1.0, 1.0, 0.5, 1.0, eta).entries[0, 0] == \
            pytest.approx(0.75, abs=1e-12)


def test_mean_update_of_unit_case():
    mu = pbrwp_mean_update([1.0], 1.0, 1.0, 1.0, 0.5, 1.0, 0.3)
    assert mu[0] == pytest.approx(0.79, abs=1e-12)


def test_cov_update_rejects_a_collapsing_step():
    with pytest.raises(NotPositiveDefiniteError):
        pbrwp_cov_update(1.0, 1.0, 1.0, 0.5, 1.0, 10.0)


def test_kernel_moments_match_quadrature():
    s, T, beta, y = 2.0, 0.3, 1.5, 0.7
    p = QuadraticPotential([[s]])
    M = SpdMatrix.identity(1)
    lz = log_z_exact_quadratic([y], p, M, T, beta)
    axis = np.linspace(-10.0, 10.0, 4001)
    density = np.array([kernel_density([x], [y], p, M, T, beta, lz) for x in axis])
    mass = trapezoid(density, axis)
    mean = trapezoid(axis * density, axis)
    var = trapezoid((axis - mean) ** 2 * density, axis)
    k = kernel_gaussian([y], s, 1.0, T, beta)
    assert mass == pytest.approx(1.0, abs=1e-8)
    assert mean == pytest.approx(k.mean[0], rel=1e-8)
    assert var == pytest.approx(k.cov.entries[0, 0], rel=1e-8)


def test_stationary_round_trip_without_commuting(rng):
    T, beta = 0.2, 1.3
    M = random_spd(rng, 3)
    sigma = random_spd(rng, 3) + 2 * T * M
    s_inf = stationary_covariance(sigma, M, T, beta)
    _, tilde_sigma = prwpo_gaussian(np.zeros(3), s_inf, sigma, M, T, beta)
    assert np.allclose(tilde_sigma.entries, sigma / beta, rtol=1e-9, atol=1e-12)
    update = pbrwp_cov_update(s_inf, sigma, M, T, beta, 0.05)
    assert np.allclose(update.entries, s_inf.entries, rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize('T', [1.0, 1.5])
def test_stationary_covariance_needs_sigma_above_t_m(T):
    with pytest.raises(InvertibilityError):
        stationary_covariance(np.eye(2), np.eye(2), T, 1.0)


def test_max_t_check_boundary():
    sigma = np.diag([2.0, 1.0])
    assert max_t_check(sigma, np.eye(2), 1.0)
    assert not max_t_check(sigma, np.eye(2), 1.0 + 1e-9)
    assert max_t_check(sigma, np.diag([1.0, 0.5]), 2.0)


def test_conjugated_cov():
    c = conjugated_cov(np.diag([2.0, 4.0]), np.diag([2.0, 1.0]), 0.5)
    assert np.allclose(c.xi.entries, np.diag([1.0, 4.0]))
    assert np.allclose(c.k_plus, np.diag([1.5, 1.125]))
    assert np.allclose(c.k_minus, np.diag([0.5, 0.875]))
    assert c.k_minus_invertible
    assert not conjugated_cov(np.eye(1), np.eye(1), 1.0).k_minus_invertible


def test_trajectory_converges_to_the_fixed_point():
    sigma = np.array([[2.0, 0.3], [0.3, 1.0]])
    M = np.diag([1.0, 0.5])
    T, beta = 0.2, 1.0
    states = gaussian_trajectory([2.0, -1.0], np.diag([0.2, 3.0]), sigma, M, T, beta, 0.1, 400)
    assert len(states) == 401
    assert np.allclose(states[-1].sigma_k.entries,
                       stationary_covariance(sigma, M, T, beta).entries, atol=1e-6)
    assert np.allclose(states[-1].mu_k, 0.0, atol=1e-6)
    assert np.allclose(states[-1].tilde_sigma.entries, sigma, atol=1e-6)


def test_symmetric_roots(rng):
    a = random_spd(rng, 4)
    r = sym_sqrt(a)
    assert np.allclose(r @ r, a)
    assert np.allclose(sym_inv_sqrt(a) @ a @ sym_inv_sqrt(a), np.eye(4))
    assert np.allclose(sym_sqrt(np.diag([4.0, 0.0])), np.diag([2.0, 0.0]))


def test_kl_gaussians(rng):
    a = GaussianDist([1.0, 0.0], np.diag([2.0, 0.5]))
    b = GaussianDist.standard(2)
    expected = 0.5 * (2.0 - 1 - math.log(2.0) + 0.5 - 1 - math.log(0.5) + 1.0)
    assert kl_gaussians(a, b) == pytest.approx(expected)
    assert kl_gaussians(a, a) == pytest.approx(0.0, abs=1e-12)
    c = GaussianDist(rng.normal(size=3), random_spd(rng, 3))
    d = GaussianDist(rng.normal(size=3), random_spd(rng, 3))
    assert kl_gaussians(c, d) > 0
    with pytest.raises(ValueError):
        kl_gaussians(a, GaussianDist.standard(1))


def test_wasserstein_of_commuting_gaussians(rng):
    a = GaussianDist([1.0, 2.0], np.diag([4.0, 1.0]))
    b = GaussianDist([0.0, 0.0], np.diag([1.0, 9.0]))
    assert w2_gaussians(a, b) == pytest.approx(math.sqrt(5.0 + 1.0 + 4.0))
    assert w2_gaussians(a, a) == pytest.approx(0.0, abs=1e-6)
    c, d = random_spd(rng, 3), random_spd(rng, 3)
    assert bures_wasserstein(np.zeros(3), c, np.ones(3), d) == \
        pytest.approx(bures_wasserstein(np.ones(3), d, np.zeros(3), c), rel=1e-8)


def test_scalar_bounds():
    assert contraction_factor(1.0, 0.5) == pytest.approx(2 / 3)
    assert contraction_factor(1e12, 0.5) == pytest.approx(1.0)
    assert kl_decay_rate_bound(1.0, 1.0, 0.5, 1.0, 0.75, 0.06) == pytest.approx(0.01)
    assert step_size_bound(2.0, 1.0, 1.0) == pytest.approx(0.1875)
    assert step_size_bound(np.diag([2.0, 4.0]), np.diag([2.0, 4.0]), 2.0) == \
        pytest.approx(2.0 * 3 * 2.0 / 32)
    assert norm_bound_threshold(2, 0.5, 1.0) == pytest.approx(math.log(4))
    with pytest.raises(EstimationError):
        norm_bound_threshold(1, 0.5, 1.0)


def _direction(X, T, mu=1.0):
    p = QuadraticPotential(np.eye(X.shape[0]) / mu)
    M = SpdMatrix.identity(X.shape[0])
    lz = log_z(X, p, M, T, 1.0, ZMethod.exact_quadratic())
    return pbrwp_direction(X, p, M, lz, T, 1.0)


def test_contraction_diffusion_gap_is_tight_for_one_particle():
    X = np.array([[1.0], [-2.0]])
    lhs, rhs = contraction_diffusion_gap(X, [0.0, 0.0], np.eye(2), 0.5, 1.0, _direction(X, 0.5))
    assert lhs == pytest.approx(rhs)
    assert lhs == pytest.approx(-2.5)


@pytest.mark.parametrize('N', [2, 10, 50])
def test_contraction_diffusion_gap_holds(rng, N):
    for _ in range(20):
        X = rng.normal(size=(2, N)) * rng.uniform(0.1, 3.0)
        lhs, rhs = contraction_diffusion_gap(X, [0.0, 0.0], np.eye(2), 0.5, 1.0,
                                             _direction(X, 0.5))
        assert lhs <= rhs + 1e-9 * max(1.0, abs(rhs))
