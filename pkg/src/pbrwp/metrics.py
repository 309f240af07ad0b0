"""Ensemble diagnostics.

The KL estimate compares a Gaussian product-kernel density estimate of a 2-d
ensemble with an unnormalized target, both normalized on the same grid by
trapezoid quadrature.
"""
import dataclasses
import logging
import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import trapezoid
from scipy.special import logsumexp

from pbrwp import errors
from pbrwp.exceptions import DimensionError, EstimationError
from pbrwp.linalg import SpdMatrix, as_spd

__all__ = [
    'KlEstimateConfig', 'kl_estimate_kde', 'silverman_bandwidth', 'ensemble_moments',
    'mean_norm_trajectory', 'mean_norm', 'cov_trace', 'max_particle_norm',
]

log = logging.getLogger(__name__)

MIN_BANDWIDTH = 1e-3
MIN_TARGET_MASS = 1e-12
DENSITY_FLOOR = 1e-300
BLOCK_ELEMENTS = 2 ** 22
# pre-clamp values below this are reported, not silently clamped
NEGATIVE_KL_TOLERANCE = -1e-6


def _pair(value, name):
    if value is None:
        return None
    value = tuple(float(v) for v in np.atleast_1d(np.asarray(value, dtype=float)))
    if len(value) == 1:
        value = value * 2
    if len(value) != 2:
        raise DimensionError('%s must have two entries, got %d' % (name, len(value)))
    return value


@dataclasses.dataclass(frozen=True)
class KlEstimateConfig:
    """
    Grid and bandwidth of the KL estimate.  Without ``grid_min``/``grid_max``
    the grid is the particle bounding box widened by four bandwidths.

    >>> KlEstimateConfig(grid_min=-6, grid_max=6).grid_max
    (6.0, 6.0)
    >>> KlEstimateConfig(resolution=8)
    Traceback (most recent call last):
    ...
    ValueError: resolution must be at least 16
    """
    grid_min: Optional[Tuple[float, float]] = None
    grid_max: Optional[Tuple[float, float]] = None
    resolution: int = 200
    bandwidth: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'grid_min', _pair(self.grid_min, 'grid_min'))
        object.__setattr__(self, 'grid_max', _pair(self.grid_max, 'grid_max'))
        if (self.grid_min is None) != (self.grid_max is None):
            raise ValueError('grid_min and grid_max must be given together')
        if self.grid_min is not None and not all(
                hi > lo for lo, hi in zip(self.grid_min, self.grid_max)):
            raise ValueError('grid_max must exceed grid_min componentwise')
        if int(self.resolution) < 16:
            raise ValueError('resolution must be at least 16')
        if self.bandwidth is not None and not float(self.bandwidth) > 0:
            raise ValueError('bandwidth must be positive')

    @property
    def fixed_grid(self) -> bool:
        return self.grid_min is not None

    def describe(self) -> dict:
        return {
            'direction': 'KL(particle KDE || target)',
            'grid_min': None if self.grid_min is None else list(self.grid_min),
            'grid_max': None if self.grid_max is None else list(self.grid_max),
            'resolution': int(self.resolution),
            'bandwidth': 'silverman' if self.bandwidth is None else float(self.bandwidth),
        }


def silverman_bandwidth(X) -> NDArray:
    """
    Per-axis h = sigma N^(-1/6), the two-dimensional rule of thumb.

    >>> silverman_bandwidth(np.array([[-1.0, 1.0], [0.0, 0.0]])).round(4).tolist()
    [1.2599, 0.0]
    """
    X = np.asarray(X, dtype=float)
    N = X.shape[1]
    if N < 2:
        return np.zeros(X.shape[0])
    return np.std(X, axis=1, ddof=1) * N ** (-1 / 6)


def _sorted_columns(X):
    # column order fixed by value, so the estimate cannot depend on particle order
    return X[:, np.lexsort(X[::-1])]


def _log_target_on_grid(log_target_unnorm, G, vectorized):
    if vectorized:
        values = np.asarray(log_target_unnorm(G), dtype=float)
    else:
        values = np.array([log_target_unnorm(g) for g in G.T], dtype=float)
    if values.shape != (G.shape[1],):
        raise DimensionError('target log density must give one value per grid point')
    return values


def kl_estimate_kde(X, log_target_unnorm: Callable, cfg: KlEstimateConfig = None,
                    vectorized=False) -> float:
    """
    Estimate KL(rho || pi) for a 2 x N ensemble and an unnormalized log target.

    ``log_target_unnorm`` maps a point to log pi up to a constant; with
    ``vectorized`` it maps a 2 x G array of points to G values.
    """
    cfg = cfg or KlEstimateConfig()
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != 2:
        raise DimensionError('the KL estimate needs a 2 x N ensemble, got shape %s' % (X.shape,))
    N = X.shape[1]
    if N == 0:
        raise EstimationError('the KL estimate needs at least one particle')
    X = _sorted_columns(X)

    if cfg.bandwidth is None:
        h = np.maximum(silverman_bandwidth(X), MIN_BANDWIDTH)
    else:
        h = np.full(2, float(cfg.bandwidth))
    if cfg.fixed_grid:
        lo, hi = np.array(cfg.grid_min), np.array(cfg.grid_max)
    else:
        lo, hi = X.min(axis=1) - 4 * h, X.max(axis=1) + 4 * h
    n = int(cfg.resolution)
    axes = [np.linspace(lo[a], hi[a], n) for a in range(2)]
    spacing = (hi - lo) / (n - 1)
    h = np.maximum(h, spacing)

    # product kernel: rho(g1, g2) = mean_j k1(g1 - x1j) k2(g2 - x2j), by blocks of grid rows
    logk = [-0.5 * ((axes[a][:, None] - X[a][None, :]) / h[a]) ** 2 for a in range(2)]
    rows = max(1, BLOCK_ELEMENTS // (n * N))
    log_rho = np.concatenate([
        logsumexp(logk[0][start:start + rows, None, :] + logk[1][None, :, :], axis=2)
        for start in range(0, n, rows)
    ]) - math.log(N) - math.log(2 * math.pi * h[0] * h[1])

    G1, G2 = np.meshgrid(axes[0], axes[1], indexing='ij')
    G = np.stack([G1.ravel(), G2.ravel()])
    log_pi = _log_target_on_grid(log_target_unnorm, G, vectorized).reshape(n, n)
    if not np.any(np.isfinite(log_pi)):
        raise EstimationError('target has no mass on the grid')
    shift = float(np.max(log_pi))

    def integrate(F):
        return float(trapezoid(trapezoid(F, axes[1], axis=1), axes[0]))

    pi_mass = integrate(np.exp(log_pi - shift))
    if pi_mass * math.exp(min(shift, 700.0)) < MIN_TARGET_MASS:
        raise EstimationError(
            'target quadrature mass below %g on the grid %s..%s'
            % (MIN_TARGET_MASS, lo.tolist(), hi.tolist()))
    log_pi = log_pi - shift - math.log(pi_mass)

    rho = np.exp(log_rho)
    rho_mass = integrate(rho)
    if not rho_mass > 0:
        raise EstimationError('particle density has no mass on the grid')
    rho = rho / rho_mass
    log_rho = log_rho - math.log(rho_mass)

    support = rho > DENSITY_FLOOR
    integrand = np.where(support, rho * (log_rho - np.where(support, log_pi, 0.0)), 0.0)
    value = integrate(integrand)
    log.debug('KL estimate %.6g (bandwidth %s, grid %d^2)', value, h.tolist(), n)
    if value < NEGATIVE_KL_TOLERANCE:
        errors.report_error(EstimationError('KL estimate %g is below zero' % value))
    return max(value, 0.0)


def ensemble_moments(X) -> Tuple[NDArray, NDArray]:
    """
    Sample mean and unbiased sample covariance of the columns.

    >>> mean, cov = ensemble_moments(np.array([[1.0, -1.0], [0.0, 0.0]]))
    >>> (mean + 0.0).tolist(), cov.tolist()
    ([0.0, 0.0], [[2.0, 0.0], [0.0, 0.0]])
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError('an ensemble is a d x N matrix, got shape %s' % (X.shape,))
    if X.shape[1] < 2:
        raise EstimationError('a sample covariance needs at least two particles')
    return X.mean(axis=1), np.atleast_2d(np.cov(X, ddof=1))


def mean_norm(X, M: SpdMatrix = None) -> float:
    m = np.asarray(X, dtype=float).mean(axis=1)
    if M is None:
        return float(np.linalg.norm(m))
    w = as_spd(M).whiten(m)
    return float(math.sqrt(np.dot(w, w)))


def mean_norm_trajectory(snapshots: Sequence, M: SpdMatrix = None):
    """
    |mean of the particles| per snapshot, Euclidean or in the M^{-1} metric.

    >>> mean_norm_trajectory([np.array([[0.0, 2.0], [0.0, 0.0]]), np.array([[3.0], [4.0]])])
    [1.0, 5.0]
    """
    dims = {np.shape(X)[0] for X in snapshots}
    if len(dims) > 1:
        raise DimensionError('snapshots have different dimensions %s' % sorted(dims))
    return [mean_norm(X, M) for X in snapshots]


def cov_trace(X) -> float:
    """Trace of the sample covariance; a single particle has none and gives 0."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] < 2:
        return 0.0
    return float(np.trace(ensemble_moments(X)[1]))


def max_particle_norm(X, M: SpdMatrix = None) -> float:
    """
    >>> max_particle_norm(np.array([[3.0, 1.0], [4.0, 0.0]]))
    5.0
    """
    X = np.asarray(X, dtype=float)
    if M is None:
        return float(np.max(np.linalg.norm(X, axis=0)))
    return float(np.sqrt(np.max(np.sum(as_spd(M).whiten(X) ** 2, axis=0))))
