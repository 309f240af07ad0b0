"""Statistical end-to-end checks; the long ones are marked ``slow``."""
import dataclasses
import math

import numpy as np
import pytest

from pbrwp.experiment import parse_file
from pbrwp.gaussian import contraction_diffusion_gap, gaussian_trajectory
from pbrwp.io import worker_count
from pbrwp.kernel import ZMethod, log_z
from pbrwp.linalg import PreconditionerSpec, RandomStreams, SpdMatrix
from pbrwp.metrics import kl_estimate_kde, max_particle_norm
from pbrwp.potentials import QuadraticPotential
from pbrwp.samplers import SamplerConfig, get_sampler, mala_step, pbrwp_direction


def final_ensemble(sampler, X):
    for _, X in sampler.iterate(X):
        pass
    return X


@pytest.mark.slow
def test_large_ensemble_follows_the_gaussian_recursion():
    sigma = np.array([[1.5, 0.3], [0.3, 0.8]])
    cfg = SamplerConfig(eta=0.1, T=0.2, z_method=ZMethod.exact_quadratic(), iters=200, seed=1,
                        workers=worker_count())
    rng = RandomStreams(1).for_init()
    X0 = np.array([[1.0], [-1.0]]) + np.sqrt([[0.3], [2.0]]) * rng.standard_normal((2, 5000))
    sampler = get_sampler('pbrwp', QuadraticPotential(sigma), cfg)
    states = gaussian_trajectory(X0.mean(axis=1), np.cov(X0), sigma, np.eye(2), cfg.T, 1.0,
                                 cfg.eta, cfg.iters)
    for k, X in sampler.iterate(X0):
        if k in (50, 200):
            expected = states[k].sigma_k.entries
            error = np.linalg.norm(np.cov(X) - expected) / np.linalg.norm(expected)
            assert error <= 0.05, (k, error)


@pytest.mark.slow
def test_mala_stationary_variance():
    p = QuadraticPotential([[2.0]])
    rng = np.random.default_rng(17)
    X = np.sqrt(2.0) * rng.standard_normal((1, 2000))
    variances = []
    for k in range(600):
        X, _ = mala_step(X, p, 0.5, 1.0, rng)
        if k >= 100:
            variances.append(np.var(X))
    assert np.mean(variances) == pytest.approx(2.0, rel=0.02)


@pytest.mark.slow
def test_two_moons_beats_ula(configs_dir):
    def kl(cfg, X):
        potential = cfg.build_potential()
        return kl_estimate_kde(X, lambda G: -potential.values(G), cfg.kl_config, vectorized=True)

    cfg = parse_file(configs_dir / 'two_moons.ini')
    sampler = cfg.build_sampler()
    first = None
    for k, X in sampler.iterate(cfg.initial_ensemble()):
        if k == 1:
            first = kl(cfg, X)
    pbrwp_final = kl(cfg, X)

    ula = parse_file(configs_dir / 'two_moons_ula.ini')
    ula_final = np.mean([
        kl(ula, final_ensemble(c.build_sampler(), c.initial_ensemble()))
        for c in (ula.with_overrides(seed=seed) for seed in range(5))])
    assert pbrwp_final < first
    assert pbrwp_final < ula_final


@pytest.mark.slow
def test_outermost_particle_grows_like_log_n():
    T, beta = 0.5, 1.0
    sigma = SpdMatrix.from_diagonal([1.0, 2.0])
    cfg = SamplerConfig(eta=0.1, T=T, beta=beta, z_method=ZMethod.exact_quadratic(),
                        iters=400, preconditioner=PreconditionerSpec.diagonal([1.0, 2.0]))
    sizes = [8, 64, 512]
    norms = []
    for N in sizes:
        X0 = RandomStreams(N).for_init().standard_normal((2, N))
        X = final_ensemble(get_sampler('pbrwp', QuadraticPotential(sigma), cfg), X0)
        norms.append(max_particle_norm(X, sigma))
    slope = np.polyfit(np.log(sizes), norms, 1)[0]
    assert slope <= 1.5 * 2 * T / beta


def test_contraction_diffusion_on_random_ensembles():
    rng = np.random.default_rng(99)
    M = SpdMatrix.identity(2)
    p = QuadraticPotential(np.eye(2))
    worst = -math.inf
    for _ in range(1000):
        N = int(rng.integers(1, 30))
        T = float(rng.uniform(0.05, 2.0))
        X = rng.normal(size=(2, N)) * rng.uniform(0.1, 5.0) + rng.normal(size=(2, 1))
        delta = pbrwp_direction(X, p, M, log_z(X, p, M, T, 1.0, ZMethod.exact_quadratic()),
                                T, 1.0)
        lhs, rhs = contraction_diffusion_gap(X, [0.0, 0.0], M, T, 1.0, delta)
        worst = max(worst, lhs - rhs)
    assert worst <= 1e-9


@pytest.mark.slow
def test_scaled_temperature_keeps_the_ensemble_spread(configs_dir):
    cfg = parse_file(configs_dir / 'gaussian_50d.ini')
    traces = {'auto': [], 1.0: []}
    for beta in traces:
        for seed in range(5):
            run = cfg.with_overrides(seed=seed)
            run = dataclasses.replace(run, sampler_config=dataclasses.replace(
                run.sampler_config, beta=beta, iters=300))
            X = final_ensemble(run.build_sampler(), run.initial_ensemble())
            traces[beta].append(np.trace(np.cov(X)))
    assert np.median(traces['auto']) > np.median(traces[1.0])
