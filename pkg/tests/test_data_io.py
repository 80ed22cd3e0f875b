import json

import numpy as np
import pytest

from services.data_io import (
    dumps,
    grid_from_dict,
    grid_to_dict,
    ingest_pgm,
    load_measure,
    read_grid_json,
    read_measure_csv,
    write_json,
    write_points_csv,
)
from services.datums import build_datum, datum_names, get_datum_by_id, get_datum_definitions
from services.measures import DiscreteMeasure, GridDensity1D, GridDensityND, ParticleSystem


def _write(path, payload):
    path.write_bytes(payload)
    return str(path)


def test_binary_pgm(tmp_path):
    path = _write(tmp_path / "two.pgm", b"P5\n2 1\n255\n" + bytes([0, 128]))
    grid = ingest_pgm(path)
    assert isinstance(grid, GridDensityND)
    assert grid.hi == (2.0, 1.0)
    np.testing.assert_allclose(grid.cells[:, 0], [255 / 382, 127 / 382])
    assert grid.mass == pytest.approx(1.0)


def test_plain_pgm(tmp_path):
    path = _write(tmp_path / "two.pgm", b"P2\n2 1\n255\n0 128\n")
    atoms = ingest_pgm(path, as_atoms=True)
    assert isinstance(atoms, DiscreteMeasure)
    np.testing.assert_allclose(atoms.points, [[0.5, 0.5], [1.5, 0.5]])
    np.testing.assert_allclose(atoms.weights, [255 / 382, 127 / 382])


def test_rows_are_flipped_so_y_points_up(tmp_path):
    # top row dark, bottom row white
    path = _write(tmp_path / "rows.pgm", b"P5\n1 2\n255\n" + bytes([0, 255]))
    grid = ingest_pgm(path)
    np.testing.assert_allclose(grid.cells[0], [0.0, 1.0])


def test_single_pixel_image(tmp_path):
    grid = ingest_pgm(_write(tmp_path / "one.pgm", b"P5\n1 1\n255\n" + bytes([10])))
    assert grid.cells.shape == (1, 1)
    assert grid.mass == pytest.approx(1.0)


def test_bad_images(tmp_path):
    with pytest.raises(ValueError, match="zero total mass"):
        ingest_pgm(_write(tmp_path / "white.pgm", b"P5\n2 2\n255\n" + bytes([255] * 4)))
    with pytest.raises(ValueError):
        ingest_pgm(_write(tmp_path / "broken.pgm", b"P5\nnot a header\n"))
    with pytest.raises(ValueError):
        ingest_pgm(_write(tmp_path / "text.pgm", b"hello world"))
    with pytest.raises(FileNotFoundError):
        ingest_pgm(str(tmp_path / "missing.pgm"))


def test_points_csv(tmp_path):
    path = str(tmp_path / "points.csv")
    write_points_csv(ParticleSystem(np.array([[0.1, 0.2], [0.3, 0.4]])), path)
    with open(path, "r", encoding="utf-8") as handle:
        assert handle.readline().strip() == "x0,x1,w"
    measure = read_measure_csv(path)
    np.testing.assert_allclose(measure.points, [[0.1, 0.2], [0.3, 0.4]])
    np.testing.assert_allclose(measure.weights, [0.5, 0.5])


def test_csv_without_weights(tmp_path):
    path = tmp_path / "atoms.csv"
    path.write_text("x0\n0.0\n1.0\n3.0\n")
    measure = read_measure_csv(str(path))
    assert measure.dim == 1
    np.testing.assert_allclose(measure.weights, 1.0 / 3.0)
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="expected columns"):
        read_measure_csv(str(bad))


def test_grid_json(tmp_path):
    path = tmp_path / "grid.json"
    path.write_text(json.dumps({"lo": [0, 0], "hi": [1, 2], "cells": [[1.0, 0.0], [0.0, 1.0]]}))
    grid = read_grid_json(str(path))
    assert isinstance(grid, GridDensityND) and grid.dim == 2
    one_d = GridDensity1D.uniform(0.0, 1.0, 4)
    assert grid_to_dict(one_d)["cells"] == [1.0, 1.0, 1.0, 1.0]


def test_incomplete_grid_objects():
    with pytest.raises(ValueError, match="missing x_max"):
        grid_from_dict({"x_min": 0.0, "cells": [1.0]})
    with pytest.raises(ValueError, match="missing cells"):
        grid_from_dict({"lo": [0.0, 0.0], "hi": [1.0, 1.0]})
    with pytest.raises(ValueError, match="must be an object"):
        grid_from_dict([1.0, 2.0])


def test_file_paths_can_be_refused(tmp_path):
    (tmp_path / "atoms.csv").write_text("x0\n0.0\n")
    with pytest.raises(ValueError, match="file paths are not accepted"):
        load_measure("atoms.csv", base_dir=str(tmp_path), allow_files=False)
    assert load_measure("delta:0", allow_files=False).mass == pytest.approx(1.0)


def test_seed_reaches_the_noisy_datum():
    loaded = load_measure("omega2-noisy", seed=3)
    np.testing.assert_array_equal(loaded.cells, build_datum("omega2-noisy", seed=3).cells)
    assert not np.array_equal(loaded.cells, load_measure("omega2-noisy", seed=4).cells)


def test_inline_specs():
    uniform = load_measure("uniform:0:2:10")
    assert isinstance(uniform, GridDensity1D) and uniform.m_cells == 10
    assert load_measure("uniform:0:1", m_cells=30).m_cells == 30
    dirac = load_measure(" delta:0.5 ")
    np.testing.assert_allclose(dirac.points, [[0.5]])
    assert load_measure("omega2").m_cells == 200
    assert load_measure("omega2", m_cells=50).m_cells == 50
    inline_grid = load_measure({"x_min": 0.0, "x_max": 1.0, "cells": [1.0, 1.0]})
    assert inline_grid.mass == pytest.approx(1.0)


def test_measure_spec_errors(tmp_path):
    with pytest.raises(ValueError):
        load_measure("")
    with pytest.raises(ValueError, match="bad uniform spec"):
        load_measure("uniform:1")
    with pytest.raises(FileNotFoundError):
        load_measure("nowhere.csv")
    (tmp_path / "notes.txt").write_text("x")
    with pytest.raises(ValueError, match="cannot read measure"):
        load_measure("notes.txt", base_dir=str(tmp_path))


def test_relative_paths_resolve_against_base_dir(tmp_path):
    (tmp_path / "atoms.csv").write_text("x0,w\n0.0,0.25\n1.0,0.75\n")
    measure = load_measure("atoms.csv", base_dir=str(tmp_path))
    np.testing.assert_allclose(measure.weights, [0.25, 0.75])


def test_builtin_datums():
    assert datum_names() == ["omega1", "omega2", "omega2-noisy"]
    assert len(get_datum_definitions()) == 3
    assert get_datum_by_id("omega3") is None
    omega1 = build_datum("omega1")
    assert omega1.mass == pytest.approx(1.0)
    assert omega1.cells.max() == pytest.approx(40.0)
    omega2 = build_datum("omega2", 100)
    assert omega2.mass == pytest.approx(1.0)
    np.testing.assert_allclose(omega2.cells[20:40], 5.0)
    with pytest.raises(ValueError, match="unknown datum"):
        build_datum("omega3")


def test_noisy_datum_is_seeded():
    first = build_datum("omega2-noisy")
    again = build_datum("omega2-noisy")
    other = build_datum("omega2-noisy", seed=1)
    assert first.m_cells == 100
    assert first.mass == pytest.approx(1.0)
    assert np.all(first.cells >= 0)
    np.testing.assert_array_equal(first.cells, again.cells)
    assert not np.array_equal(first.cells, other.cells)


def test_json_output_handles_numpy(tmp_path):
    text = dumps({"b": np.arange(2), "a": np.float64(1.5)})
    assert json.loads(text) == {"a": 1.5, "b": [0, 1]}
    assert text.index('"a"') < text.index('"b"')
    path = tmp_path / "out.json"
    write_json({"n": np.int64(3)}, str(path))
    assert path.read_text().endswith("}\n")
    with pytest.raises(TypeError):
        dumps({"x": object()})
