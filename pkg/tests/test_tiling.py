import numpy as np
import pytest
from scipy import stats

from services.measures import GridDensity1D, GridDensityND
from services.tiling import build_tiling, particles_from_tiling, slice_decomposition


@pytest.mark.parametrize(
    "n, d, expected",
    [(5, 2, (2, 0, 1)), (4, 2, (2, 0, 0)), (7, 3, (1, 2, 3)), (30, 3, (3, 0, 3)), (1, 4, (1, 0, 0)), (9, 1, (9, 0, 0))],
)
def test_slice_decomposition(n, d, expected):
    n_tilde, m, l = slice_decomposition(n, d)
    assert (n_tilde, m, l) == expected
    assert n_tilde ** (d - m) * (n_tilde + 1) ** m + l == n


def test_slice_decomposition_errors():
    with pytest.raises(ValueError, match="N >= 1"):
        slice_decomposition(0, 2)
    with pytest.raises(ValueError):
        slice_decomposition(4, 0)


def test_five_tiles_of_the_unit_square():
    tiling = build_tiling(GridDensityND.uniform([0.0, 0.0], [1.0, 1.0], 100), 5)
    assert tiling.n == 5
    assert tiling.branch_counts == {(): 2, (0,): 3, (1,): 2}
    np.testing.assert_allclose(tiling.masses, 0.2, atol=1e-6)

    boxes = {index: box for index, box in zip(tiling.index_set, tiling.boxes)}
    assert boxes[(0, 0)][0, 1] == pytest.approx(0.6)
    assert boxes[(1, 0)][0, 0] == pytest.approx(0.6)
    np.testing.assert_allclose([boxes[(0, c)][1, 1] for c in range(3)], [1 / 3, 2 / 3, 1.0])
    np.testing.assert_allclose([boxes[(1, c)][1, 1] for c in range(2)], [0.5, 1.0])

    points = particles_from_tiling(tiling).positions
    for point, box in zip(points, tiling.boxes):
        assert np.all(point > box[:, 0]) and np.all(point < box[:, 1])


def test_quartiles_in_1d():
    tiling = build_tiling(GridDensity1D.uniform(0.0, 1.0, 100), 4)
    np.testing.assert_allclose(tiling.boxes[:, 0, 1], [0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(tiling.points[:, 0], [0.125, 0.375, 0.625, 0.875])
    np.testing.assert_allclose(tiling.masses, 0.25)


def test_four_quadrants():
    tiling = build_tiling(GridDensityND.uniform([0.0, 0.0], [1.0, 1.0], 100), 4)
    np.testing.assert_allclose(tiling.points, [[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]])


def test_single_tile_is_the_center_of_mass(bump_density):
    tiling = build_tiling(bump_density, 1)
    assert tiling.points[0, 0] == pytest.approx(0.5)
    assert tiling.masses[0] == pytest.approx(1.0)


def test_slice_counts_and_equal_masses_in_3d(rng):
    cells = rng.uniform(0.5, 2.0, size=(100, 100, 100))
    grid = GridDensityND((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), cells)
    tiling = build_tiling(grid, 30)
    n_tilde, _, _ = slice_decomposition(30, 3)
    assert tiling.n == 30
    assert all(n_tilde <= count <= n_tilde + 1 for count in tiling.branch_counts.values())
    assert np.max(np.abs(tiling.masses - 1.0 / 30)) <= 1e-6 / 30


def test_density_with_a_hole():
    cells = np.concatenate([np.ones(40), np.zeros(20), np.ones(40)])
    tiling = build_tiling(GridDensity1D(0.0, 1.0, cells), 2)
    np.testing.assert_allclose(tiling.masses, 0.5)
    assert tiling.boxes[0, 0, 1] == pytest.approx(0.4)


def test_wasserstein_rate_of_tiling_particles():
    # centers of N equal cells: W1 to uniform[0, 1] is exactly 1 / (4 N)
    uniform = GridDensity1D.uniform(0.0, 1.0, 1000)
    reference = (np.arange(65536) + 0.5) / 65536
    scaled = []
    for n in (16, 64, 256, 1024):
        points = particles_from_tiling(build_tiling(uniform, n)).positions[:, 0]
        w1 = stats.wasserstein_distance(points, reference)
        n_tilde, _, _ = slice_decomposition(n, 1)
        scaled.append(w1 * n_tilde)
    assert max(scaled) <= 0.26
    assert min(scaled) >= 0.24


def test_tiling_serialization():
    data = build_tiling(GridDensityND.uniform([0.0, 0.0], [1.0, 1.0], 20), 5).to_dict()
    assert data["N"] == 5 and data["dim"] == 2
    assert len(data["boxes"]) == 5 and set(data["boxes"][0]) == {"lo", "hi"}
    assert len(data["points"]) == 5
