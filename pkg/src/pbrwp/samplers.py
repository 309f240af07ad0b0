"""Particle samplers: the preconditioned proximal particle method and Langevin baselines.

An ensemble is a d x N float array whose columns are the particles.  Step
functions return a new array and never modify their input.
"""
import concurrent.futures
import dataclasses
import logging
import math
from typing import List, Union

import numpy as np
from numpy.typing import NDArray
from scipy.special import softmax

from pbrwp.exceptions import DimensionError, DivergenceError
from pbrwp.kernel import ZMethod, interaction_matrix, log_z
from pbrwp.linalg import PreconditionerSpec, RandomStreams, SpdMatrix, as_spd, as_vector
from pbrwp.potentials import Potential

__all__ = [
    'SamplerConfig', 'AdamPrecondState', 'as_ensemble', 'check_ensemble',
    'pbrwp_direction', 'pbrwp_step', 'brwp_step', 'ula_step', 'mala_step', 'mla_step',
    'myula_step', 'particle_normals', 'soft_threshold', 'l1_prox', 'adam_precond_update',
    'variable_pbrwp_step', 'Sampler', 'SAMPLERS', 'get_sampler',
]

log = logging.getLogger(__name__)

DIVERGENCE_BOUND = 1e8
# upper bound on rows * N entries of one softmax block
BLOCK_ELEMENTS = 2 ** 22


@dataclasses.dataclass(frozen=True)
class SamplerConfig:
    """
    >>> SamplerConfig(beta='auto').beta_for(4)
    0.5
    """
    eta: float = 0.1
    T: float = 0.05
    beta: Union[float, str] = 1.0
    preconditioner: PreconditionerSpec = dataclasses.field(default_factory=PreconditionerSpec)
    z_method: ZMethod = dataclasses.field(default_factory=ZMethod)
    iters: int = 500
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError('eta must be positive')
        if not self.T > 0:
            raise ValueError('T must be positive')
        if self.beta != 'auto' and not float(self.beta) > 0:
            raise ValueError("beta must be positive or 'auto'")
        if self.iters < 0:
            raise ValueError('iters must be non-negative')
        if self.workers < 1:
            raise ValueError('workers must be at least 1')

    def beta_for(self, dim) -> float:
        if self.beta == 'auto':
            return dim ** -0.5
        return float(self.beta)

    def resolve(self, dim) -> 'SamplerConfig':
        return dataclasses.replace(self, beta=self.beta_for(dim))


@dataclasses.dataclass(frozen=True, eq=False)
class AdamPrecondState:
    v: NDArray
    k: int = 0
    beta2: float = 0.999
    epsilon: float = 1e-3

    def __post_init__(self):
        v = np.array(self.v, dtype=float)
        if np.any(v < 0):
            raise ValueError('second moments must be non-negative')
        if self.k < 0:
            raise ValueError('step counter must be non-negative')
        v.setflags(write=False)
        object.__setattr__(self, 'v', v)

    @classmethod
    def initial(cls, dim, **kw):
        return cls(np.zeros(dim), **kw)


def as_ensemble(X, dim=None) -> NDArray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError('an ensemble is a d x N matrix, got shape %s' % (X.shape,))
    if dim is not None and X.shape[0] != dim:
        raise DimensionError('ensemble has dimension %d, expected %d' % (X.shape[0], dim))
    return X


def check_ensemble(X, iteration=None) -> NDArray:
    """
    Raise DivergenceError for the first particle with a non-finite or huge coordinate.

    >>> check_ensemble(np.array([[0.0, 1.0], [2.0, np.inf]]), iteration=4)
    Traceback (most recent call last):
    ...
    pbrwp.exceptions.DivergenceError: diverged at iteration 4, particle 1: inf
    """
    bad = ~np.isfinite(X) | (np.abs(X) > DIVERGENCE_BOUND)
    if bad.any():
        j = int(np.argmax(bad.any(axis=0)))
        value = X[:, j][bad[:, j]][0]
        raise DivergenceError(iteration, j, value)
    return X


def _diffusion(X, W, workers=1) -> NDArray:
    """Columns sum_j softmax(W)_ij (x_i - x_j), i.e. X - X softmax(W)^T, by row blocks."""
    N = X.shape[1]
    rows = max(1, min(N, BLOCK_ELEMENTS // max(1, N)))
    blocks = [slice(start, min(start + rows, N)) for start in range(0, N, rows)]
    # offsets from the first particle; coincident particles give exact zeros
    Y = X - X[:, :1]

    def block(sl):
        S = softmax(W[sl], axis=1)
        return Y[:, sl] * S.sum(axis=1) - Y @ S.T

    if workers > 1 and len(blocks) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(block, blocks))
    else:
        parts = [block(sl) for sl in blocks]
    return np.concatenate(parts, axis=1)


def pbrwp_direction(X, p: Potential, M: SpdMatrix, log_z_values, T, beta, workers=1) -> NDArray:
    """
    The update direction with the step size factored out:
    -M grad V(X) / 2 + (X - X softmax(W)^T) / (2T).
    """
    X = as_ensemble(X, p.dim)
    M = as_spd(M)
    W = interaction_matrix(X, M, T, beta, log_z_values)
    return -M.matvec(p.grads(X)) / 2 + _diffusion(X, W.w, workers) / (2 * T)


def pbrwp_step(X, p: Potential, cfg: SamplerConfig, rng, iteration=None) -> NDArray:
    """
    One step of the preconditioned proximal particle method:

        X' = X - (eta/2) M grad V(X) + (eta/(2T)) (X - X softmax(W)^T)

    in the order log Z, W, softmax, update; gradients are taken at X.
    """
    X = check_ensemble(as_ensemble(X, p.dim), iteration)
    d = X.shape[0]
    beta = cfg.beta_for(d)
    M = cfg.preconditioner.matrix(d)
    lz = log_z(X, p, M, cfg.T, beta, cfg.z_method, rng, cfg.workers)
    W = interaction_matrix(X, M, cfg.T, beta, lz)
    out = X - (cfg.eta / 2) * M.matvec(p.grads(X)) \
        + (cfg.eta / (2 * cfg.T)) * _diffusion(X, W.w, cfg.workers)
    return check_ensemble(out, iteration)


def brwp_step(X, p: Potential, cfg: SamplerConfig, rng, iteration=None) -> NDArray:
    cfg = dataclasses.replace(cfg, preconditioner=PreconditionerSpec.identity())
    return pbrwp_step(X, p, cfg, rng, iteration=iteration)


def particle_normals(rng, shape) -> NDArray:
    """
    A d x N block of standard normals drawn particle by particle, so that the
    draws of particle j do not depend on the ensemble size.

    >>> a = particle_normals(np.random.default_rng(3), (2, 5))
    >>> b = particle_normals(np.random.default_rng(3), (2, 2))
    >>> bool(np.array_equal(a[:, :2], b))
    True
    """
    d, N = shape
    return rng.standard_normal((N, d)).T


def ula_step(X, p: Potential, tau, beta, rng, iteration=None) -> NDArray:
    """x' = x - tau grad V(x) + sqrt(2 tau / beta) xi"""
    X = as_ensemble(X, p.dim)
    xi = particle_normals(rng, X.shape)
    out = X - tau * p.grads(X) + math.sqrt(2 * tau / beta) * xi
    return check_ensemble(out, iteration)


def mla_step(X, p: Potential, tau, beta, M: SpdMatrix, rng, iteration=None) -> NDArray:
    """Langevin step preconditioned by a constant M:
    x' = x - tau M grad V + sqrt(2 tau / beta) L xi, with L L^T = M."""
    X = as_ensemble(X, p.dim)
    M = as_spd(M)
    xi = particle_normals(rng, X.shape)
    out = X - tau * M.matvec(p.grads(X)) + math.sqrt(2 * tau / beta) * M.sqrt_matvec(xi)
    return check_ensemble(out, iteration)


def mala_step(X, p: Potential, tau, beta, rng, iteration=None):
    """
    Metropolis-adjusted Langevin step for pi proportional to exp(-beta V).

    Returns the new ensemble and the fraction of accepted proposals.
    """
    X = as_ensemble(X, p.dim)
    G = p.grads(X)
    noise_rng, accept_rng = rng.spawn(2)
    proposal = X - tau * G + math.sqrt(2 * tau / beta) * particle_normals(noise_rng, X.shape)
    Gp = p.grads(proposal)
    forward = np.sum((proposal - X + tau * G) ** 2, axis=0)
    backward = np.sum((X - proposal + tau * Gp) ** 2, axis=0)
    log_alpha = -beta * (p.values(proposal) - p.values(X)) \
        - beta * (backward - forward) / (4 * tau)
    u = accept_rng.random(X.shape[1])
    with np.errstate(divide='ignore'):
        accept = (log_alpha >= 0) | (np.log(u) < log_alpha)
    out = np.where(accept[None, :], proposal, X)
    return check_ensemble(out, iteration), float(np.mean(accept))


def soft_threshold(x, t) -> NDArray:
    """
    Proximal map of t |.|_1.

    >>> soft_threshold(np.array([2.5, -0.5, -3.0]), 1.0).tolist()
    [1.5, -0.0, -2.0]
    """
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def l1_prox(lam):
    """prox of theta * lam |.|_1, as a map (x, theta) -> vector."""
    def prox(x, theta):
        return soft_threshold(x, lam * theta)
    return prox


def myula_step(X, grad_f, prox_g, tau, theta, rng, iteration=None) -> NDArray:
    """
    Moreau-Yosida regularized Langevin step for f + g:

        X' = (1 - tau/theta) X - tau grad f(X) + (tau/theta) prox_{theta g}(X) + sqrt(2 tau) xi
    """
    X = as_ensemble(X)
    if isinstance(grad_f, Potential):
        G = grad_f.grads(X)
    else:
        G = np.stack([np.asarray(grad_f(x), dtype=float) for x in X.T], axis=1)
    P = np.stack([np.asarray(prox_g(x, theta), dtype=float) for x in X.T], axis=1)
    xi = particle_normals(rng, X.shape)
    out = (1 - tau / theta) * X - tau * G + (tau / theta) * P + math.sqrt(2 * tau) * xi
    return check_ensemble(out, iteration)


def adam_precond_update(state: AdamPrecondState, g):
    """
    Second-moment update with bias correction; M = diag(1 / (sqrt(v_hat) + epsilon)).

    >>> state, M = adam_precond_update(AdamPrecondState.initial(2), [0.0, 0.0])
    >>> state.k, M.diagonal.round(6).tolist()
    (1, [1000.0, 1000.0])
    """
    g = as_vector(g, len(state.v), 'gradient')
    v = state.beta2 * state.v + (1 - state.beta2) * g ** 2
    k = state.k + 1
    v_hat = v / (1 - state.beta2 ** k)
    M = SpdMatrix.from_diagonal(1 / (np.sqrt(v_hat) + state.epsilon))
    return dataclasses.replace(state, v=v, k=k), M


def variable_pbrwp_step(X, p: Potential, per_particle_M: List[SpdMatrix], cfg: SamplerConfig,
                        rng=None, iteration=None) -> NDArray:
    """
    Proximal particle step with one preconditioner per particle and Laplace normalization:

        W_ij = -beta |x_i - x_j|_{M_j}^2 / (4T) - log det(M_j) / 2 + beta V(x_j) / 2

    and drift M_j grad V(x_j) in column j.  ``rng`` is unused.
    """
    X = check_ensemble(as_ensemble(X, p.dim), iteration)
    d, N = X.shape
    if len(per_particle_M) != N:
        raise DimensionError('need one preconditioner per particle')
    Ms = [as_spd(M) for M in per_particle_M]
    beta = cfg.beta_for(d)
    G = p.grads(X)
    drift = np.stack([M.matvec(G[:, j]) for j, M in enumerate(Ms)], axis=1)
    D = np.empty((N, N))
    for j, M in enumerate(Ms):
        D[:, j] = np.sum(M.whiten(X - X[:, j:j + 1]) ** 2, axis=0)
    log_dets = np.array([M.log_det() for M in Ms])
    W = -beta * D / (4 * cfg.T) - log_dets[None, :] / 2 + beta * p.values(X)[None, :] / 2
    out = X - (cfg.eta / 2) * drift + (cfg.eta / (2 * cfg.T)) * _diffusion(X, W, cfg.workers)
    return check_ensemble(out, iteration)


class Sampler(object):
    """Drives one step function over iterations with a random stream per iteration."""
    name = None

    def __init__(self, potential: Potential, config: SamplerConfig):
        self.potential = potential
        self.config = config
        self.streams = RandomStreams(config.seed)

    @property
    def beta(self):
        return self.config.beta_for(self.potential.dim)

    def step(self, X, iteration) -> NDArray:  # pragma: no cover
        raise NotImplementedError

    def iterate(self, X, iters=None):
        """Yield (k, X^(k)) for k = 1..iters."""
        iters = self.config.iters if iters is None else iters
        for k in range(1, iters + 1):
            X = self.step(X, k)
            yield k, X


class PbrwpSampler(Sampler):
    name = 'pbrwp'

    def step(self, X, iteration):
        return pbrwp_step(X, self.potential, self.config, self.streams.for_iteration(iteration),
                          iteration=iteration)


class BrwpSampler(Sampler):
    name = 'brwp'

    def step(self, X, iteration):
        return brwp_step(X, self.potential, self.config, self.streams.for_iteration(iteration),
                         iteration=iteration)


class _LangevinSampler(Sampler):
    def __init__(self, potential, config, tau=None):
        Sampler.__init__(self, potential, config)
        self.tau = config.eta if tau is None else tau


class UlaSampler(_LangevinSampler):
    name = 'ula'

    def step(self, X, iteration):
        return ula_step(X, self.potential, self.tau, self.beta,
                        self.streams.for_iteration(iteration), iteration=iteration)


class MalaSampler(_LangevinSampler):
    name = 'mala'

    def __init__(self, potential, config, tau=None):
        _LangevinSampler.__init__(self, potential, config, tau=tau)
        self.accept_rates = []

    def step(self, X, iteration):
        X, rate = mala_step(X, self.potential, self.tau, self.beta,
                            self.streams.for_iteration(iteration), iteration=iteration)
        self.accept_rates.append(rate)
        return X


class MlaSampler(_LangevinSampler):
    name = 'mla'

    def __init__(self, potential, config, tau=None):
        _LangevinSampler.__init__(self, potential, config, tau=tau)
        self.M = config.preconditioner.matrix(potential.dim)

    def step(self, X, iteration):
        return mla_step(X, self.potential, self.tau, self.beta, self.M,
                        self.streams.for_iteration(iteration), iteration=iteration)


class MyulaSampler(_LangevinSampler):
    """MYULA on f + g with f the potential and g = lam |.|_1."""
    name = 'myula'

    def __init__(self, potential, config, tau=None, theta=1.0, lam=0.0):
        _LangevinSampler.__init__(self, potential, config, tau=tau)
        self.theta = theta
        self.prox = l1_prox(lam)

    def step(self, X, iteration):
        return myula_step(X, self.potential, self.prox, self.tau, self.theta,
                          self.streams.for_iteration(iteration), iteration=iteration)


class AdamPbrwpSampler(Sampler):
    """Variable-preconditioner steps; each particle feeds its gradient to its own Adam state."""
    name = 'pbrwp_adam'

    def __init__(self, potential, config):
        Sampler.__init__(self, potential, config)
        self.states = None

    def iterate(self, X, iters=None):
        """Yield (k, X^(k)) for k = 1..iters, starting from fresh Adam states."""
        self.states = None
        return Sampler.iterate(self, X, iters)

    def step(self, X, iteration):
        X = as_ensemble(X, self.potential.dim)
        if self.states is None:
            self.states = [AdamPrecondState.initial(X.shape[0]) for _ in range(X.shape[1])]
        G = self.potential.grads(X)
        Ms = []
        for j in range(X.shape[1]):
            self.states[j], M = adam_precond_update(self.states[j], G[:, j])
            Ms.append(M)
        return variable_pbrwp_step(X, self.potential, Ms, self.config,
                                   self.streams.for_iteration(iteration), iteration=iteration)


SAMPLERS = {cls.name: cls for cls in [
    PbrwpSampler, BrwpSampler, UlaSampler, MalaSampler, MlaSampler, MyulaSampler,
    AdamPbrwpSampler]}


def get_sampler(name, potential, config, **options) -> Sampler:
    """
    >>> from pbrwp.potentials import TwoMoonsPotential
    >>> get_sampler('mala', TwoMoonsPotential(), SamplerConfig(), tau=0.01).tau
    0.01
    """
    try:
        cls = SAMPLERS[name]
    except KeyError:
        raise KeyError('unknown sampler %r, expected one of %s' % (name, sorted(SAMPLERS)))
    return cls(potential, config, **options)
