from types import SimpleNamespace

import numpy as np
import pytest

from services.energy import (
    EnergyReport,
    attraction_energy,
    datum_constant,
    dissipation,
    fourier_energy_1d,
    grad_particles,
    interaction_energy,
    symmetrized_energy,
    total_energy,
    velocity_1d,
)
from services.kernels import PowerKernelParams
from services.measures import DiscreteMeasure, GridDensity1D, ParticleSystem, PseudoInverse1D, pseudo_inverse


def _midpoint_atoms(a, b, m):
    return DiscreteMeasure.uniform(a + (np.arange(m) + 0.5) * (b - a) / m)


def test_two_particles_against_a_dirac():
    report = total_energy(
        DiscreteMeasure.uniform([0.0, 1.0]), DiscreteMeasure.dirac(0.0), PowerKernelParams(1.0, 1.0)
    )
    assert report.attraction == pytest.approx(0.5)
    assert report.interaction == pytest.approx(-0.25)
    assert report.total == pytest.approx(0.25)
    assert report.n_particles == 2


def test_coincident_single_atoms_have_zero_energy():
    report = total_energy(DiscreteMeasure.dirac(0.3), DiscreteMeasure.dirac(0.3), PowerKernelParams(1.5, 1.5))
    assert report.total == 0.0


def test_interaction_of_fine_uniform():
    mu = _midpoint_atoms(0.0, 1.0, 2000)
    assert interaction_energy(mu, 1.0) == pytest.approx(-1.0 / 6.0, abs=1e-3)


def test_grid_data_enter_through_midpoints():
    grid = GridDensity1D.uniform(0.0, 1.0, 50)
    mu = ParticleSystem(np.array([0.5]))
    assert attraction_energy(mu, grid, 2.0) == pytest.approx(
        attraction_energy(mu, _midpoint_atoms(0.0, 1.0, 50), 2.0)
    )


def test_datum_constant_closes_the_symmetrized_identity(rng):
    mu = DiscreteMeasure(rng.uniform(-1, 1, 6), rng.dirichlet(np.ones(6)))
    omega = DiscreteMeasure(rng.uniform(-1, 1, 4), rng.dirichlet(np.ones(4)))
    report = total_energy(mu, omega, PowerKernelParams(1.4, 1.4), with_datum_constant=True)
    assert report.datum_constant == pytest.approx(datum_constant(omega, 1.4))
    assert report.total + report.datum_constant == pytest.approx(symmetrized_energy(mu, omega, 1.4))
    assert "datum_constant" in report.to_dict()
    assert "datum_constant" not in total_energy(mu, omega, PowerKernelParams(1.4, 1.4)).to_dict()


def test_report_assembly():
    report = EnergyReport.assemble(1.0, -0.5, tv_term=2.0, lam=0.1)
    assert report.total == pytest.approx(0.7)
    assert report.to_dict()["lambda"] == pytest.approx(0.1)
    # no regularization: an infinite TV marker must not leak into the total
    assert EnergyReport.assemble(1.0, -0.5, tv_term=float("inf"), lam=0.0).total == pytest.approx(0.5)


def test_parallel_pair_sums_match_serial(rng):
    mu = DiscreteMeasure.uniform(rng.normal(size=(700, 2)))
    omega = DiscreteMeasure.uniform(rng.normal(size=(300, 2)))
    serial = total_energy(mu, omega, PowerKernelParams(1.2, 1.7, dim=2), parallel=False)
    threaded = total_energy(mu, omega, PowerKernelParams(1.2, 1.7, dim=2), parallel=True)
    assert threaded.attraction == pytest.approx(serial.attraction, rel=1e-12)
    assert threaded.interaction == pytest.approx(serial.interaction, rel=1e-12)


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        attraction_energy(DiscreteMeasure.uniform(np.zeros((2, 2))), DiscreteMeasure.dirac(0.0), 1.0)


def test_stronger_repulsion_has_no_lower_bound():
    # omega = 1_[-1, 0], mu_n = (1/n) 1_[0, n]: E(n) = (n + 1)/2 - n^2/12
    omega = _midpoint_atoms(-1.0, 0.0, 2000)
    params = PowerKernelParams(1.0, 2.0)
    energies = []
    for n in (4, 16, 64, 256):
        energy = total_energy(_midpoint_atoms(0.0, float(n), 2000), omega, params).total
        assert energy == pytest.approx((n + 1) / 2 - n ** 2 / 12, rel=1e-5)
        energies.append(energy)
    for previous, current in zip(energies, energies[1:]):
        assert current < previous - 0.25 * abs(previous)


def _lattice_configuration(rng, n_particles, n_data):
    # particles on 0.2 Z, data on 0.1 + 0.2 Z: every pairwise gap is at least 0.1
    sites = rng.choice(40, size=n_particles + n_data, replace=False)
    x = 0.2 * sites[:n_particles]
    y = 0.1 + 0.2 * sites[n_particles:]
    return ParticleSystem(x.astype(float)), DiscreteMeasure(y, rng.dirichlet(np.ones(n_data)))


@pytest.mark.parametrize("q", [1.0, 1.5, 2.0])
def test_gradient_matches_central_differences(rng, q):
    params = PowerKernelParams(q, q)
    eps = 1e-6
    for _ in range(10):
        mu, omega = _lattice_configuration(rng, int(rng.integers(2, 21)), int(rng.integers(1, 8)))
        grad = grad_particles(mu, omega, params)
        fd = np.zeros_like(grad)
        for i in range(mu.n):
            up = mu.positions.copy()
            down = mu.positions.copy()
            up[i, 0] += eps
            down[i, 0] -= eps
            fd[i, 0] = (
                total_energy(ParticleSystem(up), omega, params).total
                - total_energy(ParticleSystem(down), omega, params).total
            ) / (2 * eps)
        assert np.linalg.norm(grad - fd) <= 1e-5 * np.linalg.norm(grad) + 1e-8


def test_gradient_in_two_dimensions(rng):
    params = PowerKernelParams(1.5, 1.2, dim=2)
    mu = ParticleSystem(rng.uniform(-1, 1, size=(6, 2)))
    omega = DiscreteMeasure.uniform(rng.uniform(-1, 1, size=(5, 2)))
    grad = grad_particles(mu, omega, params)
    eps = 1e-6
    for i in range(6):
        for k in range(2):
            up = mu.positions.copy()
            down = mu.positions.copy()
            up[i, k] += eps
            down[i, k] -= eps
            fd = (
                total_energy(ParticleSystem(up), omega, params).total
                - total_energy(ParticleSystem(down), omega, params).total
            ) / (2 * eps)
            assert grad[i, k] == pytest.approx(fd, rel=1e-5, abs=1e-9)


@pytest.mark.parametrize("q", [1.0, 1.3, 1.7])
def test_fourier_energy_matches_spatial_sum(q):
    rng = np.random.default_rng(2024)
    for _ in range(20):
        k = int(rng.integers(1, 9))
        l = int(rng.integers(1, 9))
        mu = DiscreteMeasure(rng.uniform(-2, 2, k), rng.dirichlet(np.ones(k)))
        omega = DiscreteMeasure(rng.uniform(-2, 2, l), rng.dirichlet(np.ones(l)))
        spatial = symmetrized_energy(mu, omega, q)
        assert abs(fourier_energy_1d(mu, omega, q) - spatial) <= 1e-3 * (1 + abs(spatial))


def test_fourier_energy_preconditions():
    mu = DiscreteMeasure.uniform([0.0, 1.0])
    with pytest.raises(ValueError, match="probability measures"):
        fourier_energy_1d(mu, DiscreteMeasure.dirac(0.0, mass=2.0), 1.0)
    with pytest.raises(ValueError, match="Fourier form degenerate at q=2"):
        fourier_energy_1d(mu, DiscreteMeasure.dirac(0.0), 2.0)
    assert fourier_energy_1d(mu, mu, 1.5) == 0.0
    with pytest.raises(ValueError, match="mass mismatch"):
        symmetrized_energy(mu, DiscreteMeasure.dirac(0.0, mass=2.0), 1.0)


def test_velocity_of_the_traveling_wave():
    z = (np.arange(100) + 0.5) / 100
    np.testing.assert_allclose(velocity_1d(z, 1.0 + z, 1.0, 2.0, 2.0), 2.0, atol=1e-12)


def test_dissipation_of_a_stationary_state():
    values = PseudoInverse1D(np.linspace(0.0, 1.0, 10))
    state = SimpleNamespace(X=values, Y=values, params=PowerKernelParams(1.5, 1.5))
    assert dissipation(state) == 0.0


@pytest.mark.parametrize("dim", [1, 2])
def test_energy_is_translation_invariant(rng, dim):
    mu = DiscreteMeasure(rng.normal(size=(9, dim)), rng.dirichlet(np.ones(9)))
    omega = DiscreteMeasure(rng.normal(size=(6, dim)), rng.dirichlet(np.ones(6)))
    params = PowerKernelParams(1.3, 1.8, dim=dim)
    shift = rng.uniform(-5.0, 5.0, dim)
    before = total_energy(mu, omega, params)
    after = total_energy(mu.shifted(shift), omega.shifted(shift), params)
    assert after.attraction == pytest.approx(before.attraction, rel=1e-10, abs=1e-12)
    assert after.interaction == pytest.approx(before.interaction, rel=1e-10, abs=1e-12)


def test_energy_terms_scale_with_their_exponents(rng):
    mu = DiscreteMeasure(rng.normal(size=(8, 2)), rng.dirichlet(np.ones(8)))
    omega = DiscreteMeasure(rng.normal(size=(5, 2)), rng.dirichlet(np.ones(5)))
    params = PowerKernelParams(1.3, 1.7, dim=2)
    before = total_energy(mu, omega, params)
    for s in (0.25, 3.0):
        after = total_energy(mu.scaled(s), omega.scaled(s), params)
        assert after.attraction == pytest.approx(s ** 1.3 * before.attraction, rel=1e-10)
        assert after.interaction == pytest.approx(s ** 1.7 * before.interaction, rel=1e-10)
    equal = PowerKernelParams(1.5, 1.5, dim=2)
    assert total_energy(mu.scaled(2.0), omega.scaled(2.0), equal).total == pytest.approx(
        2.0 ** 1.5 * total_energy(mu, omega, equal).total, rel=1e-10
    )


@pytest.mark.parametrize("q", [1.0, 1.5, 1.9])
def test_symmetrized_energy_is_nonnegative(q):
    rng = np.random.default_rng(7)
    for _ in range(20):
        k = int(rng.integers(1, 9))
        l = int(rng.integers(1, 9))
        mu = DiscreteMeasure(rng.uniform(-2, 2, k), rng.dirichlet(np.ones(k)))
        omega = DiscreteMeasure(rng.uniform(-2, 2, l), rng.dirichlet(np.ones(l)))
        assert symmetrized_energy(mu, omega, q) >= -1e-12


def test_dissipation_of_the_traveling_wave():
    mu = pseudo_inverse(GridDensity1D.uniform(0.0, 1.0, 100), 200)
    omega = pseudo_inverse(GridDensity1D.uniform(1.0, 2.0, 100), 200)
    state = SimpleNamespace(X=mu, Y=omega, params=PowerKernelParams(2.0, 2.0))
    assert dissipation(state) == pytest.approx(4.0, abs=1e-6)
