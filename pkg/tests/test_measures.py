import numpy as np
import pytest
from scipy import stats

from services.measures import (
    DiscreteMeasure,
    GridDensity1D,
    GridDensityND,
    ParticleSystem,
    PseudoInverse1D,
    cdf_eval,
    integrate_pushforward,
    mean,
    moment,
    pseudo_inverse,
    quantile_grid,
    quantile_particles,
    wasserstein_p,
)


def test_zero_mass_is_rejected():
    with pytest.raises(ValueError, match="empty measure"):
        DiscreteMeasure(np.array([0.0, 1.0]), np.zeros(2))
    with pytest.raises(ValueError, match="empty measure"):
        GridDensity1D(0.0, 1.0, np.zeros(4))


def test_weights_must_match_points():
    with pytest.raises(ValueError):
        DiscreteMeasure(np.array([0.0, 1.0]), np.array([1.0]))


def test_quantile_grid_midpoints():
    np.testing.assert_allclose(quantile_grid(4), [0.125, 0.375, 0.625, 0.875])


def test_pseudo_inverse_of_two_atoms():
    pi = pseudo_inverse(DiscreteMeasure.uniform([0.0, 1.0]), 4)
    np.testing.assert_array_equal(pi.values, [0.0, 0.0, 1.0, 1.0])
    assert pi.mass == pytest.approx(1.0)


def test_pseudo_inverse_is_right_continuous_on_atom_boundaries():
    # F = 1/4 on [0, 1): the grid value z = 1/4 belongs to the atom at 1
    measure = DiscreteMeasure(np.array([0.0, 1.0]), np.array([0.25, 0.75]))
    np.testing.assert_array_equal(pseudo_inverse(measure, 2).values, [1.0, 1.0])


def test_pseudo_inverse_of_uniform_grid_is_linear():
    pi = pseudo_inverse(GridDensity1D.uniform(0.0, 1.0, 1000), 500)
    np.testing.assert_allclose(pi.values, quantile_grid(500), atol=1e-12)
    assert pi.is_monotone()


def test_pseudo_inverse_keeps_the_mass():
    pi = pseudo_inverse(GridDensity1D.uniform(0.0, 1.0, 10, mass=0.5), 8)
    assert pi.mass == pytest.approx(0.5)


def test_pseudo_inverse_rejects_2d():
    with pytest.raises(ValueError, match="pseudo-inverse is 1D only"):
        pseudo_inverse(DiscreteMeasure.uniform(np.zeros((3, 2))), 4)


def test_wasserstein_of_a_shift():
    a = pseudo_inverse(GridDensity1D.uniform(0.0, 1.0, 100), 200)
    b = pseudo_inverse(GridDensity1D.uniform(1.0, 2.0, 100), 200)
    assert wasserstein_p(a, b, 1) == pytest.approx(1.0)
    assert wasserstein_p(a, b, 2) == pytest.approx(1.0)
    assert wasserstein_p(a, b, np.inf) == pytest.approx(1.0)


def test_wasserstein_one_matches_scipy(rng):
    for _ in range(5):
        x = rng.uniform(-2.0, 2.0, 5)
        y = rng.uniform(-2.0, 2.0, 5)
        # quantile steps of 1/5 fall strictly between the midpoints of a 40-point grid
        a = pseudo_inverse(DiscreteMeasure.uniform(x), 40)
        b = pseudo_inverse(DiscreteMeasure.uniform(y), 40)
        assert wasserstein_p(a, b, 1) == pytest.approx(stats.wasserstein_distance(x, y), rel=1e-12)


def test_wasserstein_errors():
    a = PseudoInverse1D(np.zeros(4))
    with pytest.raises(ValueError, match="grid sizes differ"):
        wasserstein_p(a, PseudoInverse1D(np.zeros(5)), 2)
    with pytest.raises(ValueError, match="probability measures"):
        wasserstein_p(a, PseudoInverse1D(np.zeros(4), mass=2.0), 2)
    with pytest.raises(ValueError):
        wasserstein_p(a, a, 0.5)


def test_cdf_eval():
    grid = GridDensity1D.uniform(0.0, 2.0, 4)
    assert cdf_eval(grid, 0.5) == pytest.approx(0.25)
    assert cdf_eval(grid, 5.0) == pytest.approx(1.0)
    atoms = DiscreteMeasure(np.array([0.0, 1.0]), np.array([0.3, 0.7]))
    assert cdf_eval(atoms, 0.0) == pytest.approx(0.3)
    assert cdf_eval(atoms, -0.1) == 0.0


def test_pushforward_and_moments():
    pi = pseudo_inverse(GridDensity1D.uniform(0.0, 1.0, 100), 1000)
    assert integrate_pushforward(pi, lambda x: x) == pytest.approx(0.5)
    assert integrate_pushforward(pi, lambda x: x ** 2) == pytest.approx(1.0 / 3.0, abs=1e-6)
    np.testing.assert_allclose(mean(DiscreteMeasure.dirac([1.0, -2.0])), [1.0, -2.0])
    assert moment(DiscreteMeasure.uniform([-1.0, 3.0]), 2.0) == pytest.approx(5.0)


def test_quantile_particles_of_uniform():
    particles = quantile_particles(GridDensity1D.uniform(0.0, 1.0, 100), 4)
    np.testing.assert_allclose(particles.positions[:, 0], [0.125, 0.375, 0.625, 0.875])


def test_grid_conversions():
    grid = GridDensity1D.uniform(0.0, 1.0, 4)
    atoms = grid.to_discrete()
    np.testing.assert_allclose(atoms.points[:, 0], grid.midpoints)
    assert atoms.mass == pytest.approx(1.0)
    nd = grid.to_nd()
    assert nd.dim == 1 and nd.mass == pytest.approx(1.0)
    square = GridDensityND.uniform([0.0, 0.0], [2.0, 1.0], 10)
    assert square.mass == pytest.approx(1.0)
    assert square.to_discrete().mass == pytest.approx(1.0)


def test_particle_system_basics():
    particles = ParticleSystem(np.array([0.0, 1.0]))
    assert particles.n == 2 and particles.dim == 1
    np.testing.assert_allclose(particles.to_measure().points[:, 0], [0.0, 1.0])
    assert particles.to_measure().mass == pytest.approx(1.0)


def test_wasserstein_is_nondecreasing_in_p(rng):
    a = pseudo_inverse(DiscreteMeasure(rng.normal(0.0, 1.0, 7), rng.dirichlet(np.ones(7))), 500)
    b = pseudo_inverse(DiscreteMeasure(rng.uniform(-1.0, 2.0, 5), rng.dirichlet(np.ones(5))), 500)
    distances = [wasserstein_p(a, b, p) for p in (1.0, 1.5, 2.0, 3.0, np.inf)]
    for smaller, larger in zip(distances, distances[1:]):
        assert smaller <= larger + 1e-12


def test_cdf_undoes_the_pseudo_inverse(bump_density):
    m_grid = 50
    inverse = pseudo_inverse(bump_density, m_grid)
    recovered = [cdf_eval(bump_density, x) / bump_density.mass for x in inverse.values]
    np.testing.assert_allclose(recovered, quantile_grid(m_grid), atol=1e-8)
