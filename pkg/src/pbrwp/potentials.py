"""Target potentials V, with the target density proportional to exp(-beta V).

A potential evaluates single points through ``value``/``grad``.  Ensembles
are d x N matrices; ``values``/``grads`` map over their columns, and the
concrete potentials below override them with array code.
"""
import numpy as np
from numpy.typing import NDArray

from pbrwp.exceptions import DimensionError
from pbrwp.linalg import SpdMatrix, as_spd, as_vector

__all__ = [
    'Potential', 'ZeroPotential', 'QuadraticPotential', 'TwoMoonsPotential',
    'ScaledAnnulusPotential', 'value', 'grad', 'get_potential', 'POTENTIALS',
]

RADIAL_EPS = 1e-12


class Potential(object):
    dim = None

    def value(self, x) -> float:  # pragma: no cover
        raise NotImplementedError

    def grad(self, x) -> NDArray:  # pragma: no cover
        raise NotImplementedError

    def _columns(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] != self.dim:
            raise DimensionError(
                'expected a %d x N matrix, got shape %s' % (self.dim, X.shape))
        return X

    def values(self, X) -> NDArray:
        X = self._columns(X)
        return np.array([self.value(x) for x in X.T], dtype=float)

    def grads(self, X) -> NDArray:
        X = self._columns(X)
        if X.shape[1] == 0:
            return np.zeros_like(X)
        return np.stack([self.grad(x) for x in X.T], axis=1)

    def _point(self, x):
        return as_vector(x, self.dim, 'x')


def value(p: Potential, x) -> float:
    return p.value(x)


def grad(p: Potential, x) -> NDArray:
    return p.grad(x)


class ZeroPotential(Potential):
    """V = 0: pure diffusion."""

    def __init__(self, dim):
        self.dim = int(dim)

    def value(self, x):
        self._point(x)
        return 0.0

    def grad(self, x):
        return np.zeros_like(self._point(x))

    def values(self, X):
        return np.zeros(self._columns(X).shape[1])

    def grads(self, X):
        return np.zeros_like(self._columns(X))


class QuadraticPotential(Potential):
    """
    V(x) = x^T Sigma^{-1} x / 2, the potential of N(0, Sigma / beta).

    >>> p = QuadraticPotential(np.eye(2))
    >>> p.value([0, 0]), p.grad([2.0, 0.0]).tolist()
    (0.0, [2.0, 0.0])
    """

    def __init__(self, sigma):
        self.sigma = as_spd(sigma)
        self.dim = self.sigma.dim

    def value(self, x):
        x = self._point(x)
        return float(np.dot(x, self.sigma.solve(x)) / 2)

    def grad(self, x):
        return self.sigma.solve(self._point(x))

    def values(self, X):
        X = self._columns(X)
        return np.sum(X * self.sigma.solve(X), axis=0) / 2

    def grads(self, X):
        return self.sigma.solve(self._columns(X))


def _radial_unit(X, norms):
    # zero direction at the origin
    safe = np.where(norms < RADIAL_EPS, 1.0, norms)
    return np.where(norms < RADIAL_EPS, 0.0, X / safe)


class TwoMoonsPotential(Potential):
    """
    Bimodal ring: V(x) = 2(|x| - 3)^2 - 2 log[exp(-2(x_1 - 3)^2) + exp(-2(x_1 + 3)^2)].

    >>> p = TwoMoonsPotential()
    >>> round(p.value([0.0, 0.0]), 4)
    52.6137
    >>> p.grad([3.0, 0.0]).tolist()
    [0.0, 0.0]
    """
    dim = 2
    radius = 3.0

    def values(self, X):
        X = self._columns(X)
        r = np.linalg.norm(X, axis=0)
        x1 = X[0]
        mix = np.logaddexp(-2 * (x1 - 3) ** 2, -2 * (x1 + 3) ** 2)
        return 2 * (r - self.radius) ** 2 - 2 * mix

    def grads(self, X):
        X = self._columns(X)
        r = np.linalg.norm(X, axis=0)
        g = 4 * (r - self.radius) * _radial_unit(X, r)
        # derivative of the log-sum-exp term; the two softmax weights differ by tanh(12 x_1)
        x1 = X[0]
        g[0] += 8 * x1 - 24 * np.tanh(12 * x1)
        return g

    def value(self, x):
        return float(self.values(self._point(x)[:, None])[0])

    def grad(self, x):
        return self.grads(self._point(x)[:, None])[:, 0]


class ScaledAnnulusPotential(Potential):
    """
    V(x) = (|S x| - 3)^2 with S = diag(1, 2): zero on an ellipse.

    >>> p = ScaledAnnulusPotential()
    >>> p.value([3.0, 0.0]), p.grad([3.0, 0.0]).tolist()
    (0.0, [0.0, 0.0])
    """
    dim = 2

    def __init__(self, scale=(1.0, 2.0), radius=3.0):
        self.scale = as_vector(scale, 2, 'scale')
        self.radius = float(radius)

    def values(self, X):
        X = self._columns(X)
        r = np.linalg.norm(self.scale[:, None] * X, axis=0)
        return (r - self.radius) ** 2

    def grads(self, X):
        X = self._columns(X)
        SX = self.scale[:, None] * X
        r = np.linalg.norm(SX, axis=0)
        return 2 * (r - self.radius) * self.scale[:, None] * _radial_unit(SX, r)

    def value(self, x):
        return float(self.values(self._point(x)[:, None])[0])

    def grad(self, x):
        return self.grads(self._point(x)[:, None])[:, 0]


POTENTIALS = {
    'quadratic': QuadraticPotential,
    'two_moons': TwoMoonsPotential,
    'annulus': ScaledAnnulusPotential,
}


def get_potential(name, sigma=None) -> Potential:
    """
    >>> get_potential('annulus').dim
    2
    >>> get_potential('quadratic', sigma=SpdMatrix.identity(3)).dim
    3
    """
    try:
        cls = POTENTIALS[name]
    except KeyError:
        raise KeyError('unknown potential %r, expected one of %s' % (name, sorted(POTENTIALS)))
    if cls is QuadraticPotential:
        if sigma is None:
            raise ValueError('the quadratic potential needs a covariance sigma')
        return cls(sigma)
    return cls()
