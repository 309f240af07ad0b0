import numpy as np
import pytest

from pbrwp.exceptions import DimensionError
from pbrwp.linalg import SpdMatrix
from pbrwp.potentials import (
    Potential, QuadraticPotential, ScaledAnnulusPotential, TwoMoonsPotential, ZeroPotential,
    get_potential, grad, value,
)

FD_STEP = 1e-6


def random_points(rng, dim, n=100, low=-5.0, high=5.0):
    # stay away from the origin, where the radial potentials are not differentiable
    points = []
    while len(points) < n:
        x = rng.uniform(low, high, dim)
        if np.linalg.norm(x) > 0.1:
            points.append(x)
    return points


def finite_difference(p, x):
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = FD_STEP
        g[i] = (p.value(x + e) - p.value(x - e)) / (2 * FD_STEP)
    return g


POTENTIALS = [
    QuadraticPotential([[2.0, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 0.5]]),
    QuadraticPotential(SpdMatrix.from_diagonal([0.1, 5.0])),
    TwoMoonsPotential(),
    ScaledAnnulusPotential(),
    ScaledAnnulusPotential(scale=(0.5, 3.0), radius=2.0),
]


@pytest.mark.parametrize('p', POTENTIALS, ids=lambda p: type(p).__name__)
def test_gradient_matches_finite_differences(p, rng):
    for x in random_points(rng, p.dim):
        g = p.grad(x)
        fd = finite_difference(p, x)
        assert np.linalg.norm(fd - g) <= 1e-5 * max(1.0, np.linalg.norm(g)), x


@pytest.mark.parametrize('p', POTENTIALS + [ZeroPotential(3)], ids=lambda p: type(p).__name__)
def test_batched_evaluation_matches_pointwise(p, rng):
    X = rng.normal(0.0, 2.0, (p.dim, 7))
    assert np.allclose(p.values(X), [p.value(x) for x in X.T])
    assert np.allclose(p.grads(X), np.stack([p.grad(x) for x in X.T], axis=1))
    assert value(p, X[:, 0]) == pytest.approx(p.value(X[:, 0]))
    assert np.array_equal(grad(p, X[:, 0]), p.grad(X[:, 0]))


def test_base_class_maps_over_columns():
    class Linear(Potential):
        dim = 2

        def value(self, x):
            return float(x[0] + 2 * x[1])

        def grad(self, x):
            return np.array([1.0, 2.0])

    X = np.array([[1.0, 0.0], [1.0, 3.0]])
    assert Linear().values(X).tolist() == [3.0, 6.0]
    assert Linear().grads(X).tolist() == [[1.0, 1.0], [2.0, 2.0]]
    assert Linear().grads(np.zeros((2, 0))).shape == (2, 0)


def test_two_moons_is_symmetric_and_minimal_on_the_ring():
    p = TwoMoonsPotential()
    assert p.value([3.0, 0.0]) == pytest.approx(p.value([-3.0, 0.0]))
    assert p.value([3.0, 0.0]) < p.value([0.0, 3.0])
    assert p.value([3.0, 0.0]) == pytest.approx(-2 * np.log1p(np.exp(-72.0)))
    assert np.allclose(p.grad([-3.0, 0.0]), 0.0, atol=1e-12)


def test_radial_gradients_vanish_at_the_origin():
    assert ScaledAnnulusPotential().grad([0.0, 0.0]).tolist() == [0.0, 0.0]
    g = TwoMoonsPotential().grad([0.0, 0.0])
    assert np.all(np.isfinite(g)) and g[1] == 0.0


def test_annulus_level_set():
    p = ScaledAnnulusPotential()
    for angle in np.linspace(0, 2 * np.pi, 9):
        x = np.array([3 * np.cos(angle), 1.5 * np.sin(angle)])
        assert p.value(x) == pytest.approx(0.0, abs=1e-20)


def test_dimension_checks():
    p = QuadraticPotential(np.eye(2))
    with pytest.raises(DimensionError):
        p.value([1.0, 2.0, 3.0])
    with pytest.raises(DimensionError):
        p.grads(np.ones((3, 4)))
    with pytest.raises(DimensionError):
        ZeroPotential(2).values(np.ones(2))


def test_get_potential():
    assert isinstance(get_potential('two_moons'), TwoMoonsPotential)
    with pytest.raises(ValueError):
        get_potential('quadratic')
    with pytest.raises(KeyError):
        get_potential('banana')
