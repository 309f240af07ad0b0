import numpy as np
import pytest

from pbrwp import gaussian
from pbrwp.exceptions import PbrwpError
from pbrwp.linalg import GaussianDist, RandomStreams
from pbrwp.verify import (
    CHECKS, check_kernel_moments, check_kl_nonnegativity, check_monotone_kl_decay,
    check_stationary_round_trip, check_w2_contraction, random_commuting_instance, run_checks,
)


def test_checks_run_in_a_fixed_order():
    assert list(CHECKS) == [
        'stationary_round_trip', 'monotone_kl_decay', 'w2_contraction', 'kl_nonnegativity',
        'pinned_scalars', 'max_t_boundary', 'kernel_moments']


def test_all_checks_pass():
    results = run_checks(seed=0)
    assert [r.name for r in results] == list(CHECKS)
    assert all(r.passed for r in results), [r for r in results if not r.passed]


def test_results_depend_only_on_the_seed():
    assert run_checks(seed=3, names=['w2_contraction']) == \
        run_checks(seed=3, names=['w2_contraction'])


def test_selected_checks_keep_their_streams():
    alone = run_checks(seed=5, names=['kl_nonnegativity'])
    together = run_checks(seed=5)
    assert alone[0] == [r for r in together if r.name == 'kl_nonnegativity'][0]


def test_unknown_check_is_rejected():
    with pytest.raises(PbrwpError):
        run_checks(names=['no_such_check'])


def test_commuting_instances_are_admissible():
    rng = RandomStreams(1).stream(0)
    for _ in range(20):
        inst = random_commuting_instance(rng, 4)
        assert gaussian.max_t_check(inst.sigma, inst.M, inst.T)
        assert inst.xi_eigenvalues[0] > inst.T
        assert np.allclose(inst.in_basis(inst.diag(inst.sigma)).entries, inst.sigma.entries)
        assert 0.5 <= inst.beta <= 2.0


def test_individual_checks_with_small_counts():
    rng = np.random.default_rng(9)
    assert check_stationary_round_trip(rng, instances=5).passed
    assert check_monotone_kl_decay(rng, instances=2, steps=20).passed
    assert check_w2_contraction(rng, pairs=5).passed
    assert check_kl_nonnegativity(rng, pairs=5).passed


def test_a_perturbed_proximal_map_is_caught(mocker):
    original = gaussian.prwpo_gaussian

    def perturbed(*args, **kw):
        mu, sigma = original(*args, **kw)
        return mu, sigma.scaled(1 + 1e-6)

    mocker.patch('pbrwp.verify.prwpo_gaussian', side_effect=perturbed)
    result = run_checks(names=['stationary_round_trip'])[0]
    assert not result.passed
    assert 'max relative error' in result.detail


def test_a_raising_check_counts_as_failed(mocker):
    mocker.patch.dict(CHECKS, {'pinned_scalars': mocker.Mock(side_effect=ZeroDivisionError('x'))})
    result = run_checks(names=['pinned_scalars'])[0]
    assert (result.name, result.passed) == ('pinned_scalars', False)
    assert result.detail == 'ZeroDivisionError: x'


def test_kernel_moments_agree_with_importance_estimates():
    result = check_kernel_moments(np.random.default_rng(4), instances=4, samples=50000)
    assert result.passed, result.detail


def test_kernel_moment_check_catches_a_wrong_covariance(mocker):
    original = gaussian.kernel_gaussian

    def inflated(*args, **kw):
        k = original(*args, **kw)
        return GaussianDist(k.mean, k.cov.scaled(1.2))

    mocker.patch('pbrwp.verify.kernel_gaussian', side_effect=inflated)
    result = run_checks(names=['kernel_moments'])[0]
    assert not result.passed
    assert 'covariance error' in result.detail
