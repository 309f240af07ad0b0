"""Closed forms for quadratic potentials V(x) = x^T Sigma^{-1} x / 2.

The target is pi = N(0, Sigma / beta).  When the current law is Gaussian, the
proximal map, the particle update and their fixed points stay Gaussian and are
computed here exactly; these serve as the reference for the particle code.
"""
import dataclasses
import math
from typing import List, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import LinAlgError, cholesky, eigh

from pbrwp.exceptions import (
    EstimationError, InvertibilityError, NotPositiveDefiniteError,
)
from pbrwp.linalg import GaussianDist, SpdMatrix, as_spd, as_vector

__all__ = [
    'GaussianFlowState', 'ConjugatedCov', 'sym_sqrt', 'sym_inv_sqrt', 'conjugated_cov',
    'kernel_gaussian', 'prwpo_gaussian', 'pbrwp_cov_update', 'pbrwp_mean_update',
    'gaussian_trajectory', 'stationary_covariance', 'max_t_check', 'kl_gaussians',
    'w2_gaussians', 'bures_wasserstein', 'contraction_factor', 'kl_decay_rate_bound',
    'step_size_bound', 'contraction_diffusion_gap', 'norm_bound_threshold',
]

EIGEN_FLOOR = 1e-14


@dataclasses.dataclass(frozen=True, eq=False)
class GaussianFlowState:
    mu_k: NDArray
    sigma_k: SpdMatrix
    tilde_mu: NDArray
    tilde_sigma: SpdMatrix


@dataclasses.dataclass(frozen=True, eq=False)
class ConjugatedCov:
    xi: SpdMatrix
    k_plus: NDArray
    k_minus: NDArray

    @property
    def k_minus_invertible(self) -> bool:
        return bool(np.min(np.abs(np.linalg.eigvals(self.k_minus))) > EIGEN_FLOOR)


def _sym(a):
    return (a + a.T) / 2


def _m(x) -> NDArray:
    return x.entries if isinstance(x, SpdMatrix) else np.asarray(x, dtype=float)


def sym_sqrt(a) -> NDArray:
    """
    Symmetric square root; eigenvalues below the floor count as zero.

    >>> bool(np.allclose(sym_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0])))
    True
    """
    w, v = eigh(_sym(_m(a)))
    w = np.where(w > EIGEN_FLOOR, w, 0.0)
    return _sym((v * np.sqrt(w)) @ v.T)


def sym_inv_sqrt(a) -> NDArray:
    w, v = eigh(_sym(_m(a)))
    return _sym((v / np.sqrt(np.maximum(w, EIGEN_FLOOR))) @ v.T)


def _spd(a, error=NotPositiveDefiniteError, message='covariance lost positive definiteness'):
    try:
        return SpdMatrix(_sym(a))
    except NotPositiveDefiniteError:
        raise error(message)


def conjugated_cov(sigma, M, T) -> ConjugatedCov:
    """Xi = M^{-1/2} Sigma M^{-1/2} and K_+- = I +- T M^{1/2} Sigma^{-1} M^{1/2}."""
    sigma, M = as_spd(sigma), as_spd(M)
    root, inv_root = sym_sqrt(M), sym_inv_sqrt(M)
    xi = SpdMatrix(_sym(inv_root @ sigma.entries @ inv_root))
    inner = root @ sigma.solve(root)
    eye = np.eye(sigma.dim)
    return ConjugatedCov(xi=xi, k_plus=eye + T * inner, k_minus=eye - T * inner)


def _kernel_parts(sigma, M, T, beta):
    """A = (I + T M Sigma^{-1})^{-1} and the kernel covariance
    2T/beta (T Sigma^{-1} + M^{-1})^{-1}."""
    H = SpdMatrix(T * sigma.inverse().entries + M.inverse().entries)
    A = H.solve(M.inverse().entries)
    return A, (2 * T / beta) * H.inverse().entries


def kernel_gaussian(y, sigma, M, T, beta) -> GaussianDist:
    """
    The proximal kernel K(., y) of a quadratic potential as a Gaussian.

    >>> k = kernel_gaussian([0.0], 1.0, 1.0, 0.5, 1.0)
    >>> round(float(k.cov.entries[0, 0]), 12)
    0.666666666667
    """
    sigma, M = as_spd(sigma), as_spd(M)
    A, cov = _kernel_parts(sigma, M, T, beta)
    return GaussianDist(A @ as_vector(y, sigma.dim, 'y'), SpdMatrix(_sym(cov)))


def prwpo_gaussian(mu, sigma_k, sigma_target, M, T, beta) -> Tuple[NDArray, SpdMatrix]:
    """
    Proximal map of N(mu, Sigma_k): returns (A mu, K + A Sigma_k A^T).

    >>> _, s = prwpo_gaussian([0.0], 1.0, 1.0, 1.0, 0.5, 1.0)
    >>> round(float(s.entries[0, 0]) * 9, 10)
    10.0
    """
    sigma_k, sigma, M = as_spd(sigma_k), as_spd(sigma_target), as_spd(M)
    A, cov = _kernel_parts(sigma, M, T, beta)
    tilde_mu = A @ as_vector(mu, sigma.dim, 'mu')
    return tilde_mu, _spd(cov + A @ sigma_k.entries @ A.T)


def _update_factor(sigma, M, beta, eta, tilde_sigma):
    """F = I - eta M Sigma^{-1} + (eta / beta) M tildeSigma^{-1}."""
    eye = np.eye(sigma.dim)
    return eye - eta * M.matvec(sigma.inverse().entries) \
        + (eta / beta) * M.matvec(tilde_sigma.inverse().entries)


def pbrwp_cov_update(sigma_k, sigma_target, M, T, beta, eta) -> SpdMatrix:
    """
    >>> round(float(pbrwp_cov_update(0.75, 1.0, 1.0, 0.5, 1.0, 0.3).entries[0, 0]), 12)
    0.75
    """
    sigma_k, sigma, M = as_spd(sigma_k), as_spd(sigma_target), as_spd(M)
    _, tilde_sigma = prwpo_gaussian(np.zeros(sigma.dim), sigma_k, sigma, M, T, beta)
    F = _update_factor(sigma, M, beta, eta, tilde_sigma)
    return _spd(F @ sigma_k.entries @ F.T,
                message='covariance update lost positive definiteness; step size too large')


def pbrwp_mean_update(mu_k, sigma_k, sigma_target, M, T, beta, eta) -> NDArray:
    sigma_k, sigma, M = as_spd(sigma_k), as_spd(sigma_target), as_spd(M)
    mu_k = as_vector(mu_k, sigma.dim, 'mu')
    tilde_mu, tilde_sigma = prwpo_gaussian(mu_k, sigma_k, sigma, M, T, beta)
    F = _update_factor(sigma, M, beta, eta, tilde_sigma)
    return F @ mu_k - (eta / beta) * M.matvec(tilde_sigma.solve(tilde_mu))


def gaussian_trajectory(mu0, sigma0, sigma_target, M, T, beta, eta,
                        steps) -> List[GaussianFlowState]:
    """States k = 0..steps of the Gaussian mean and covariance recursion."""
    sigma, M = as_spd(sigma_target), as_spd(M)
    mu, sigma_k = as_vector(mu0, sigma.dim, 'mu'), as_spd(sigma0)
    states = []
    for k in range(steps + 1):
        tilde_mu, tilde_sigma = prwpo_gaussian(mu, sigma_k, sigma, M, T, beta)
        states.append(GaussianFlowState(mu, sigma_k, tilde_mu, tilde_sigma))
        if k < steps:
            mu = pbrwp_mean_update(mu, sigma_k, sigma, M, T, beta, eta)
            sigma_k = pbrwp_cov_update(sigma_k, sigma, M, T, beta, eta)
    return states


def max_t_check(sigma_target, M, T) -> bool:
    """
    True iff Sigma - T M is positive semidefinite.

    >>> max_t_check(np.eye(2), np.eye(2), 1.0), max_t_check(np.eye(2), np.eye(2), 1.5)
    (True, False)
    """
    sigma, M = _m(sigma_target), _m(M)
    if sigma.ndim == 0:
        sigma, M = sigma.reshape(1, 1), M.reshape(1, 1)
    slack = 1e-12 * max(1.0, float(np.max(np.abs(np.diag(sigma)))))
    try:
        cholesky(_sym(sigma - T * M) + slack * np.eye(sigma.shape[0]), lower=True)
    except LinAlgError:
        return False
    return True


def stationary_covariance(sigma_target, M, T, beta) -> SpdMatrix:
    """
    The covariance whose proximal map is Sigma / beta:
    M^{1/2} K_- (M^{-1/2} Sigma M^{-1/2} / beta) K_+ M^{1/2}.

    >>> round(float(stationary_covariance(2.0, 1.0, 1.0, 1.0).entries[0, 0]), 12)
    1.5
    """
    sigma, M = as_spd(sigma_target), as_spd(M)
    if not max_t_check(sigma, M, T):
        raise InvertibilityError('Sigma - T M is not positive semidefinite for T=%r' % T)
    conj = conjugated_cov(sigma, M, T)
    root = sym_sqrt(M)
    cov = root @ conj.k_minus @ (conj.xi.entries / beta) @ conj.k_plus @ root
    return _spd(cov, error=InvertibilityError,
                message='no stationary covariance: Sigma is not strictly above T M')


def kl_gaussians(a: GaussianDist, b: GaussianDist) -> float:
    """
    KL(a || b), summed over generalized eigenvalues of (Sigma_a, Sigma_b).

    >>> a = GaussianDist([0.0], [[2.0]])
    >>> round(kl_gaussians(a, GaussianDist.standard(1)), 5)
    0.15343
    """
    if a.dim != b.dim:
        raise ValueError('dimension mismatch')
    lam = eigh(a.cov.entries, b.cov.entries, eigvals_only=True)
    excess = lam - 1
    terms = np.maximum(excess - np.log1p(excess), 0.0)
    diff = a.mean - b.mean
    mean_term = float(np.dot(diff, b.cov.solve(diff)))
    return 0.5 * (float(np.sum(terms)) + mean_term)


def bures_wasserstein(mean_a, cov_a, mean_b, cov_b) -> float:
    """
    W2 between Gaussians given as arrays; singular covariances are allowed.

    >>> bures_wasserstein([0.0, 0.0], np.zeros((2, 2)), [1.0, 0.0], np.zeros((2, 2)))
    1.0
    """
    cov_a, cov_b = np.atleast_2d(_m(cov_a)), np.atleast_2d(_m(cov_b))
    root_b = sym_sqrt(cov_b)
    cross = sym_sqrt(root_b @ cov_a @ root_b)
    scale = np.trace(cov_a) + np.trace(cov_b)
    trace = scale - 2 * np.trace(cross)
    if trace < 1e-12 * scale:
        trace = 0.0
    diff = np.asarray(mean_a, dtype=float) - np.asarray(mean_b, dtype=float)
    return math.sqrt(float(np.dot(diff, diff)) + float(trace))


def w2_gaussians(a: GaussianDist, b: GaussianDist) -> float:
    """
    >>> w2_gaussians(GaussianDist([0.0], [[1.0]]), GaussianDist([0.0], [[4.0]]))
    1.0
    """
    if a.dim != b.dim:
        raise ValueError('dimension mismatch')
    return bures_wasserstein(a.mean, a.cov, b.mean, b.cov)


def contraction_factor(C_upper, T) -> float:
    """
    >>> round(contraction_factor(1.0, 0.5), 12)
    0.666666666667
    """
    return 1 / (1 / (2 * C_upper) + 1 / (2 * T)) / (2 * T)


def kl_decay_rate_bound(c_lower, C_upper, T, beta, lambda_min_xi, eta) -> float:
    """
    Per-step rate r with KL_{k+1} <= (1 - r) KL_k.

    >>> round(kl_decay_rate_bound(1.0, 1.0, 0.5, 1.0, 0.75, 0.06), 12)
    0.01
    """
    bracket = beta + 2 * T / (1 + T / C_upper) * (1 + T / c_lower) ** 2 / lambda_min_xi
    return eta / (2 * C_upper * bracket)


def step_size_bound(tilde_xi_k, tilde_xi_inf, beta) -> float:
    """
    >>> step_size_bound(2.0, 1.0, 1.0)
    0.1875
    """
    xi_k, xi_inf = as_spd(tilde_xi_k), as_spd(tilde_xi_inf)
    gap = np.max(np.abs(np.linalg.eigvalsh(_sym(
        xi_k.inverse().entries - xi_inf.inverse().entries))))
    first = math.inf if gap == 0 else 1 / (2 * gap)
    second = 3 * float(np.linalg.eigvalsh(xi_k.entries)[0]) / 32
    return beta * min(first, second)


def contraction_diffusion_gap(X, x_hat, M, T, mu_strong, delta_dir) -> Tuple[float, float]:
    """
    Both sides of <Delta, M^{-1}(X - X_hat)> <= |X - X_hat| (-mu/2 |X - X_hat|
    + (1 + sqrt N)/(2T) |X - mean(X)|), norms being |A|^2 = tr(A^T M^{-1} A).
    """
    M = as_spd(M)
    X = np.asarray(X, dtype=float)
    x_hat = as_vector(x_hat, M.dim, 'x_hat')
    N = X.shape[1]

    def norm(A):
        return math.sqrt(max(float(np.sum(A * M.solve(A))), 0.0))

    E = X - x_hat[:, None]
    lhs = float(np.sum(np.asarray(delta_dir, dtype=float) * M.solve(E)))
    spread = norm(X - X.mean(axis=1, keepdims=True))
    n_e = norm(E)
    rhs = n_e * (-mu_strong / 2 * n_e + (1 + math.sqrt(N)) / (2 * T) * spread)
    return lhs, rhs


def norm_bound_threshold(N, T, beta) -> float:
    """
    >>> round(norm_bound_threshold(2, 0.5, 1.0), 4)
    1.3863
    """
    if N < 2:
        raise EstimationError('the outermost-particle threshold needs at least two particles')
    return 2 / beta * T * math.log(2 * (N - 1) / T)
