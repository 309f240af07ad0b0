"""Normalizing constants, interaction weights and the proximal kernel.

For a potential V, preconditioner M, regularization T and inverse temperature
beta, the kernel of the regularized Wasserstein proximal is

    K(x, y) = exp(-beta/2 (V(x) + |x - y|_M^2 / (2T))) / Z(y).

Z is only ever handled as log Z.
"""
import concurrent.futures
import dataclasses
import logging
import math

import numpy as np
from numpy.typing import NDArray
from scipy.special import logsumexp, softmax

from pbrwp.exceptions import EstimationError, PbrwpError
from pbrwp.linalg import SpdMatrix, as_spd, as_vector, pairwise_scaled_sq, scaled_norm_sq
from pbrwp.potentials import Potential, QuadraticPotential

__all__ = [
    'ZMethod', 'InteractionMatrix', 'log_z_monte_carlo', 'log_z_laplace',
    'log_z_exact_quadratic', 'log_z', 'interaction_matrix', 'row_softmax',
    'kernel_density', 'prwpo_density_grid',
]

log = logging.getLogger(__name__)

DEFAULT_Z_SAMPLES = 1000


@dataclasses.dataclass(frozen=True)
class ZMethod:
    """
    How Z(y) is estimated.

    >>> ZMethod.from_name('mc', 50)
    ZMethod(kind='monte_carlo', n_samples=50)
    >>> ZMethod.from_name('laplace').name
    'laplace'
    """
    kind: str = 'monte_carlo'
    n_samples: int = DEFAULT_Z_SAMPLES

    _names = {'mc': 'monte_carlo', 'laplace': 'laplace', 'exact_quadratic': 'exact_quadratic'}

    def __post_init__(self):
        if self.kind not in self._names.values():
            raise ValueError('unknown Z method %r' % self.kind)
        if self.n_samples < 1:
            raise ValueError('n_samples must be at least 1')

    @classmethod
    def monte_carlo(cls, n_samples=DEFAULT_Z_SAMPLES):
        return cls('monte_carlo', int(n_samples))

    @classmethod
    def laplace(cls):
        return cls('laplace')

    @classmethod
    def exact_quadratic(cls):
        return cls('exact_quadratic')

    @classmethod
    def from_name(cls, name, n_samples=DEFAULT_Z_SAMPLES):
        try:
            return cls(cls._names[name], int(n_samples))
        except KeyError:
            raise ValueError('unknown Z method %r, expected one of %s' % (name, sorted(cls._names)))

    @property
    def name(self):
        return {v: k for k, v in self._names.items()}[self.kind]


@dataclasses.dataclass(frozen=True, eq=False)
class InteractionMatrix:
    w: NDArray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError('interaction matrix must be square, got shape %s' % (w.shape,))
        if not np.all(np.isfinite(w)):
            raise EstimationError('interaction matrix has non-finite entries')
        object.__setattr__(self, 'w', w)

    @property
    def N(self) -> int:
        return self.w.shape[0]


def log_z_monte_carlo(y, p: Potential, M: SpdMatrix, T, beta, n, rng, full_output=False):
    """
    Importance-sampling estimate of log Z(y) with proposals z ~ N(y, 2 T M / beta).

    With ``full_output`` also returns the relative standard error of Z.

    >>> from pbrwp.potentials import ZeroPotential
    >>> lz = log_z_monte_carlo([0.0], ZeroPotential(1), SpdMatrix.identity(1), 0.5, 1.0, 10,
    ...                        np.random.default_rng(0))
    >>> round(lz, 6) == round(0.5 * math.log(2 * math.pi), 6)
    True
    """
    M = as_spd(M)
    y = as_vector(y, M.dim, 'y')
    d = M.dim
    noise = M.sqrt_matvec(rng.standard_normal((d, int(n))))
    Z = y[:, None] + math.sqrt(2 * T / beta) * noise
    logw = -beta * p.values(Z) / 2
    result = (d / 2) * math.log(4 * math.pi * T / beta) + M.log_det() / 2 \
        + float(logsumexp(logw)) - math.log(n)
    if not full_output:
        return result
    if n < 2:
        return result, math.inf
    w = np.exp(logw - logw.max())
    return result, float(np.std(w, ddof=1) / np.mean(w) / math.sqrt(n))


def log_z_laplace(y, p: Potential, M: SpdMatrix, beta) -> float:
    """
    Small-T approximation -beta V(y) / 2 + log det(M) / 2, without the T-dependent constant.

    >>> p = QuadraticPotential(np.eye(2))
    >>> log_z_laplace([2.0, 0.0], p, SpdMatrix.identity(2), 1.0)
    -1.0
    """
    M = as_spd(M)
    return -beta * p.value(as_vector(y, M.dim, 'y')) / 2 + M.log_det() / 2


def log_z_exact_quadratic(y, p: QuadraticPotential, M: SpdMatrix, T, beta):
    """
    Closed-form log Z(y) for V(z) = z^T Sigma^{-1} z / 2.

    With precision P = beta (Sigma^{-1} / 2 + M^{-1} / (2T)) and b = beta M^{-1} y / (2T),

        log Z(y) = (d/2) log 2 pi - log det(P) / 2 + b^T P^{-1} b / 2 - beta y^T M^{-1} y / (4T).

    ``y`` may be a vector or a d x N matrix of columns.

    >>> p = QuadraticPotential(np.eye(1))
    >>> z0 = log_z_exact_quadratic([0.0], p, SpdMatrix.identity(1), 0.5, 1.0)
    >>> round(math.exp(z0) ** 2 * 3 / math.pi, 12)
    4.0
    """
    if not isinstance(p, QuadraticPotential):
        raise PbrwpError('the exact normalizing constant needs a quadratic potential')
    M = as_spd(M)
    Y = np.asarray(y, dtype=float)
    single = Y.ndim == 1
    if single:
        Y = Y[:, None]
    d = M.dim
    precision = SpdMatrix(
        beta * (p.sigma.inverse().entries / 2 + M.inverse().entries / (2 * T)))
    MinvY = M.solve(Y)
    B = beta * MinvY / (2 * T)
    quad = np.sum(B * precision.solve(B), axis=0) / 2
    offset = beta * np.sum(Y * MinvY, axis=0) / (4 * T)
    result = (d / 2) * math.log(2 * math.pi) - precision.log_det() / 2 + quad - offset
    return float(result[0]) if single else result


def log_z(X, p: Potential, M: SpdMatrix, T, beta, method: ZMethod, rng=None,
          workers=1) -> NDArray:
    """
    log Z at every column of X.

    Monte Carlo estimates use one child stream of ``rng`` per particle, so the
    result does not depend on ``workers``.
    """
    M = as_spd(M)
    X = np.asarray(X, dtype=float)
    if method.kind == 'laplace':
        return -beta * p.values(X) / 2 + M.log_det() / 2
    if method.kind == 'exact_quadratic':
        return np.atleast_1d(log_z_exact_quadratic(X, p, M, T, beta))
    if rng is None:
        raise PbrwpError('Monte Carlo normalizing constants need a random stream')
    streams = rng.spawn(X.shape[1])
    log.debug('Monte Carlo log Z: %d particles, %d samples', X.shape[1], method.n_samples)

    def estimate(j):
        return log_z_monte_carlo(X[:, j], p, M, T, beta, method.n_samples, streams[j])

    if workers > 1 and X.shape[1] > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            return np.array(list(pool.map(estimate, range(X.shape[1]))))
    return np.array([estimate(j) for j in range(X.shape[1])])


def interaction_matrix(X, M: SpdMatrix, T, beta, log_z) -> InteractionMatrix:
    """
    W_ij = -beta |x_i - x_j|_M^2 / (4T) - log Z(x_j).

    >>> W = interaction_matrix(np.array([[0.0, 2.0]]), SpdMatrix.identity(1), 0.5, 1.0, [0, 0])
    >>> (W.w + 0.0).tolist()
    [[0.0, -2.0], [-2.0, 0.0]]
    """
    X = np.asarray(X, dtype=float)
    log_z = np.asarray(log_z, dtype=float)
    if log_z.shape != (X.shape[1],):
        raise ValueError('need one log Z per particle')
    W = pairwise_scaled_sq(X, X, M)
    W *= -beta / (4 * T)
    W -= log_z[None, :]
    return InteractionMatrix(W)


def row_softmax(W) -> NDArray:
    """
    Row-wise softmax with the row maximum subtracted.

    >>> row_softmax(np.array([[0.0, -2.0]])).round(4).tolist()
    [[0.8808, 0.1192]]
    """
    w = W.w if isinstance(W, InteractionMatrix) else np.asarray(W, dtype=float)
    return softmax(w, axis=1)


def kernel_density(x, y, p: Potential, M: SpdMatrix, T, beta, log_z_y) -> float:
    """
    >>> p = QuadraticPotential(np.eye(1))
    >>> lz = log_z_exact_quadratic([0.0], p, SpdMatrix.identity(1), 0.5, 1.0)
    >>> round(kernel_density([0.0], [0.0], p, SpdMatrix.identity(1), 0.5, 1.0, lz), 4)
    0.4886
    """
    M = as_spd(M)
    x = as_vector(x, M.dim, 'x')
    exponent = -beta / 2 * (p.value(x) + scaled_norm_sq(x, y, M) / (2 * T))
    return math.exp(exponent - log_z_y)


def prwpo_density_grid(X, p: Potential, M: SpdMatrix, T, beta, log_z, grid) -> NDArray:
    """
    The proximal density (1/N) sum_j K(g, x_j) at the columns of ``grid`` (d x G).
    """
    M = as_spd(M)
    grid = np.asarray(grid, dtype=float)
    log_z = np.asarray(log_z, dtype=float)
    D = pairwise_scaled_sq(grid, np.asarray(X, dtype=float), M)
    exponent = -beta / 2 * (p.values(grid)[:, None] + D / (2 * T)) - log_z[None, :]
    return np.exp(logsumexp(exponent, axis=1) - math.log(len(log_z)))
