"""Small dense linear algebra for symmetric positive definite matrices.

Every application of an inverse goes through the Cholesky factor; diagonal
matrices skip the factorization and work on the diagonal directly.
"""
import dataclasses
import functools
from typing import Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist

from pbrwp.exceptions import DimensionError, NotPositiveDefiniteError

__all__ = [
    'SpdMatrix', 'PreconditionerSpec', 'GaussianDist', 'RandomStreams',
    'scaled_norm_sq', 'pairwise_scaled_sq', 'sample_gaussian', 'log_det', 'as_vector',
]

SYMMETRY_RTOL = 1e-8


def _readonly(a):
    a.setflags(write=False)
    return a


def as_vector(x, dim=None, name='vector') -> NDArray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError('%s must be one-dimensional, got shape %s' % (name, x.shape))
    if dim is not None and x.shape[0] != dim:
        raise DimensionError('%s has length %d, expected %d' % (name, x.shape[0], dim))
    return x


class SpdMatrix(object):
    """
    A symmetric positive definite matrix with its Cholesky factor.

    The input is symmetrized as (A + A^T) / 2; asymmetry beyond a relative
    Frobenius error of 1e-8 is rejected, as is any non-positive pivot.

    >>> m = SpdMatrix([[4.0, 0.0], [0.0, 1.0]])
    >>> m.is_diagonal, m.dim
    (True, 2)
    >>> m.solve(np.array([2.0, 1.0])).tolist()
    [0.5, 1.0]
    >>> SpdMatrix([[1.0, 2.0], [2.0, 1.0]])
    Traceback (most recent call last):
    ...
    pbrwp.exceptions.NotPositiveDefiniteError: matrix is not positive definite
    """

    def __init__(self, entries):
        a = np.array(entries, dtype=float)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise DimensionError('expected a non-empty square matrix, got shape %s' % (a.shape,))
        if not np.all(np.isfinite(a)):
            raise NotPositiveDefiniteError('matrix has non-finite entries')
        scale = np.linalg.norm(a)
        if np.linalg.norm(a - a.T) > SYMMETRY_RTOL * scale:
            raise NotPositiveDefiniteError('matrix is not symmetric')
        a = (a + a.T) / 2

        diagonal = np.diag(a).copy()
        if not np.any(a - np.diag(diagonal)):
            if np.any(diagonal <= 0):
                raise NotPositiveDefiniteError('matrix is not positive definite')
            self._diagonal = _readonly(diagonal)
            self._chol = None
        else:
            try:
                chol = cholesky(a, lower=True)
            except LinAlgError:
                raise NotPositiveDefiniteError('matrix is not positive definite')
            if np.any(np.diag(chol) <= 0):  # pragma: no cover
                raise NotPositiveDefiniteError('matrix is not positive definite')
            self._diagonal = None
            self._chol = _readonly(chol)
        self._entries = _readonly(a)

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim))

    @classmethod
    def from_diagonal(cls, values):
        """
        >>> SpdMatrix.from_diagonal([4, 1]).entries.tolist()
        [[4.0, 0.0], [0.0, 1.0]]
        """
        return cls(np.diag(as_vector(values, name='diagonal')))

    @property
    def dim(self) -> int:
        return self._entries.shape[0]

    @property
    def entries(self) -> NDArray:
        return self._entries

    @property
    def is_diagonal(self) -> bool:
        return self._diagonal is not None

    @property
    def diagonal(self) -> NDArray:
        return np.diag(self._entries) if self._diagonal is None else self._diagonal

    @functools.cached_property
    def chol(self) -> NDArray:
        """Lower Cholesky factor L with L L^T = entries."""
        if self._chol is not None:
            return self._chol
        return _readonly(np.diag(np.sqrt(self._diagonal)))

    def _check(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.dim:
            raise DimensionError(
                'operand has leading dimension %d, expected %d' % (b.shape[0], self.dim))
        return b

    def _column(self, v, b):
        return v if b.ndim == 1 else v.reshape((-1,) + (1,) * (b.ndim - 1))

    def solve(self, b) -> NDArray:
        """M^{-1} b for a vector or a matrix of columns."""
        b = self._check(b)
        if self.is_diagonal:
            return b / self._column(self._diagonal, b)
        return cho_solve((self._chol, True), b)

    def whiten(self, b) -> NDArray:
        """L^{-1} b, so that |L^{-1} b|^2 = b^T M^{-1} b."""
        b = self._check(b)
        if self.is_diagonal:
            return b / self._column(np.sqrt(self._diagonal), b)
        return solve_triangular(self._chol, b, lower=True)

    def matvec(self, b) -> NDArray:
        b = self._check(b)
        if self.is_diagonal:
            return self._column(self._diagonal, b) * b
        return self._entries @ b

    def sqrt_matvec(self, b) -> NDArray:
        """L b, mapping standard normal draws to N(0, M) draws."""
        b = self._check(b)
        if self.is_diagonal:
            return self._column(np.sqrt(self._diagonal), b) * b
        return self._chol @ b

    def log_det(self) -> float:
        return float(2 * np.sum(np.log(np.diag(self.chol))))

    def inverse(self) -> 'SpdMatrix':
        """Explicit inverse, for the closed-form Gaussian oracles only."""
        if self.is_diagonal:
            return SpdMatrix(np.diag(1 / self._diagonal))
        return SpdMatrix(_symmetrize(cho_solve((self._chol, True), np.eye(self.dim))))

    def scaled(self, factor) -> 'SpdMatrix':
        return SpdMatrix(factor * self._entries)

    def __eq__(self, other):
        return isinstance(other, SpdMatrix) and np.array_equal(self._entries, other._entries)

    def __hash__(self):  # pragma: no cover
        return hash(self._entries.tobytes())

    def __repr__(self):
        if self.is_diagonal:
            return 'SpdMatrix.from_diagonal(%s)' % self._diagonal.tolist()
        return 'SpdMatrix(%s)' % self._entries.tolist()


def _symmetrize(a):
    return (a + a.T) / 2


def as_spd(m) -> SpdMatrix:
    return m if isinstance(m, SpdMatrix) else SpdMatrix(m)


@dataclasses.dataclass(frozen=True)
class PreconditionerSpec:
    """
    Configuration carrier for the preconditioner M.

    >>> PreconditionerSpec.diagonal([4, 1]).matrix(2)
    SpdMatrix.from_diagonal([4.0, 1.0])
    >>> PreconditionerSpec.identity().matrix(3).log_det()
    0.0
    """
    variant: str = 'identity'
    values: Optional[Tuple[float, ...]] = None
    dense: Optional[SpdMatrix] = None

    def __post_init__(self):
        if self.variant not in ('identity', 'diagonal', 'dense'):
            raise ValueError('unknown preconditioner variant %r' % self.variant)
        if self.variant == 'diagonal':
            if not self.values or any(v <= 0 for v in self.values):
                raise NotPositiveDefiniteError('diagonal preconditioner entries must be positive')
        if self.variant == 'dense' and not isinstance(self.dense, SpdMatrix):
            raise ValueError('dense preconditioner needs an SpdMatrix')

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def diagonal(cls, values):
        return cls('diagonal', values=tuple(float(v) for v in values))

    @classmethod
    def from_matrix(cls, matrix):
        return cls('dense', dense=as_spd(matrix))

    def matrix(self, dim) -> SpdMatrix:
        if self.variant == 'identity':
            return SpdMatrix.identity(dim)
        m = SpdMatrix.from_diagonal(self.values) if self.variant == 'diagonal' else self.dense
        if m.dim != dim:
            raise DimensionError('preconditioner has dimension %d, expected %d' % (m.dim, dim))
        return m

    def describe(self) -> str:
        if self.variant == 'identity':
            return 'identity'
        if self.variant == 'diagonal':
            return 'diag: ' + ', '.join(repr(v) for v in self.values)
        return 'dense: ' + repr(self.dense.entries.tolist())


@dataclasses.dataclass(frozen=True, eq=False)
class GaussianDist:
    mean: NDArray
    cov: SpdMatrix

    def __post_init__(self):
        object.__setattr__(self, 'cov', as_spd(self.cov))
        mean = _readonly(np.array(as_vector(self.mean, name='mean')))
        object.__setattr__(self, 'mean', mean)
        if mean.shape[0] != self.cov.dim:
            raise DimensionError(
                'mean has length %d but covariance has dimension %d'
                % (mean.shape[0], self.cov.dim))

    @property
    def dim(self) -> int:
        return self.cov.dim

    @classmethod
    def standard(cls, dim):
        return cls(np.zeros(dim), SpdMatrix.identity(dim))


class RandomStreams(object):
    """
    Reproducible random streams keyed by (master seed, consumer keys).

    >>> s = RandomStreams(7)
    >>> a = s.for_iteration(3).standard_normal(2)
    >>> b = RandomStreams(7).for_iteration(3).standard_normal(2)
    >>> bool((a == b).all())
    True
    """
    INIT = 0
    ITERATION = 1

    def __init__(self, seed):
        self.seed = int(seed)
        if self.seed < 0:
            raise ValueError('seed must be non-negative')

    def stream(self, *key) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed] + [int(k) for k in key]))

    def for_init(self) -> np.random.Generator:
        return self.stream(self.INIT)

    def for_iteration(self, iteration) -> np.random.Generator:
        return self.stream(self.ITERATION, iteration)


def scaled_norm_sq(x, y, M: SpdMatrix) -> float:
    """
    (x - y)^T M^{-1} (x - y) via the triangular factor.

    >>> scaled_norm_sq([3.0, 1.0], [1.0, 0.0], SpdMatrix.from_diagonal([4, 1]))
    2.0
    """
    M = as_spd(M)
    x, y = as_vector(x, M.dim, 'x'), as_vector(y, M.dim, 'y')
    w = M.whiten(x - y)
    return float(np.dot(w, w))


def pairwise_scaled_sq(X, Y, M: SpdMatrix) -> NDArray:
    """Matrix of |x_i - y_j|_M^2 for the columns of X (d x N) and Y (d x K)."""
    M = as_spd(M)
    wx, wy = M.whiten(X), M.whiten(Y)
    return cdist(wx.T, wy.T, 'sqeuclidean')


def sample_gaussian(g: GaussianDist, rng: np.random.Generator, size=None) -> NDArray:
    """mean + L xi; with ``size`` returns a d x size matrix of draws."""
    if size is None:
        return g.mean + g.cov.sqrt_matvec(rng.standard_normal(g.dim))
    return g.mean[:, None] + g.cov.sqrt_matvec(rng.standard_normal((g.dim, size)))


def log_det(M: SpdMatrix) -> float:
    """
    >>> round(log_det(SpdMatrix.from_diagonal([4, 1])), 4)
    1.3863
    """
    return as_spd(M).log_det()
