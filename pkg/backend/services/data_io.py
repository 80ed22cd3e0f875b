"""
Reading and writing measures.

Formats:
    CSV       header ``x0[,x1,...],w``, one atom per row (``w`` optional: equal weights)
    grid JSON ``{"x_min", "x_max", "cells"}`` (1D) or ``{"lo", "hi", "cells"}`` (nested lists, d-D)
    PGM       P2/P5 grayscale images; dark pixels carry mass
    inline    ``uniform:a:b[:M]``, ``delta:a``, or a built-in datum name
"""

import json
import logging
import os
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd
from PIL import Image, UnidentifiedImageError

from .datums import build_datum, datum_names
from .measures import DiscreteMeasure, GridDensity1D, GridDensityND, ParticleSystem

logger = logging.getLogger(__name__)

DEFAULT_UNIFORM_CELLS = 1000
# Pillow rescales P2/P5 data to the full range of the decoded mode
FULL_SCALE = {"L": 255.0, "I": 65535.0, "I;16": 65535.0, "I;16B": 65535.0}

Measure = Union[DiscreteMeasure, GridDensity1D, GridDensityND]


# ==============================
# Images
# ==============================
def ingest_pgm(path: str, as_atoms: bool = False) -> Union[GridDensityND, DiscreteMeasure]:
    """
    Grayscale image as a probability density on [0, width] x [0, height].

    Cell (i, j) is the pixel in column i and row height-1-j (the image is
    flipped so y points up); its density is proportional to full_scale - pixel.
    With ``as_atoms`` the nonzero cells are returned as weighted cell centers.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"image not found: {path}")
    try:
        with Image.open(path) as image:
            if image.format != "PPM" or image.mode not in FULL_SCALE:
                raise ValueError(f"{path}: expected a grayscale PGM image, got {image.format} {image.mode}")
            pixels = np.asarray(image, dtype=float)
            full = FULL_SCALE[image.mode]
    except (UnidentifiedImageError, SyntaxError, OSError) as exc:
        raise ValueError(f"{path}: malformed PGM header ({exc})") from exc

    darkness = np.clip(full - pixels, 0.0, None)
    total = darkness.sum()
    if total <= 0:
        raise ValueError(f"{path}: image has zero total mass (all white)")
    height, width = darkness.shape
    cells = (darkness / total).T[:, ::-1]
    grid = GridDensityND((0.0, 0.0), (float(width), float(height)), cells)
    logger.info(f"[CLI] ingested {path}: {width}x{height} pixels")
    return grid.to_discrete() if as_atoms else grid


# ==============================
# CSV / JSON
# ==============================
def read_measure_csv(path: str) -> DiscreteMeasure:
    frame = pd.read_csv(path)
    coords = sorted((c for c in frame.columns if c.startswith("x")), key=lambda c: int(c[1:] or 0))
    if not coords:
        raise ValueError(f"{path}: expected columns x0[,x1,...][,w]")
    points = frame[coords].to_numpy(dtype=float)
    if "w" in frame.columns:
        weights = frame["w"].to_numpy(dtype=float)
    else:
        weights = np.full(points.shape[0], 1.0 / max(points.shape[0], 1))
    return DiscreteMeasure(points, weights)


def points_frame(measure: Union[DiscreteMeasure, ParticleSystem]) -> pd.DataFrame:
    atoms = measure.to_measure() if isinstance(measure, ParticleSystem) else measure
    frame = pd.DataFrame(atoms.points, columns=[f"x{k}" for k in range(atoms.dim)])
    frame["w"] = atoms.weights
    return frame


def write_points_csv(measure: Union[DiscreteMeasure, ParticleSystem], path: str) -> None:
    points_frame(measure).to_csv(path, index=False, float_format="%.17g")


def _require(data: Dict[str, Any], keys: Sequence[str]) -> None:
    missing = [key for key in keys if key not in data]
    if missing:
        raise ValueError(f"grid JSON is missing {', '.join(missing)}")


def grid_from_dict(data: Dict[str, Any]) -> Union[GridDensity1D, GridDensityND]:
    if not isinstance(data, dict):
        raise ValueError("grid JSON must be an object")
    if "x_min" in data:
        _require(data, ("x_max", "cells"))
        return GridDensity1D(data["x_min"], data["x_max"], np.asarray(data["cells"], dtype=float))
    if "lo" in data:
        _require(data, ("hi", "cells"))
        return GridDensityND(tuple(data["lo"]), tuple(data["hi"]), np.asarray(data["cells"], dtype=float))
    raise ValueError("grid JSON needs x_min/x_max/cells or lo/hi/cells")


def grid_to_dict(grid: Union[GridDensity1D, GridDensityND]) -> Dict[str, Any]:
    if isinstance(grid, GridDensity1D):
        return {"x_min": grid.x_min, "x_max": grid.x_max, "cells": grid.cells.tolist()}
    return {"lo": list(grid.lo), "hi": list(grid.hi), "cells": grid.cells.tolist()}


def read_grid_json(path: str) -> Union[GridDensity1D, GridDensityND]:
    with open(path, "r", encoding="utf-8") as handle:
        return grid_from_dict(json.load(handle))


def json_default(value: Any) -> Any:
    """``json.dump`` hook for numpy scalars and arrays."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def dumps(data: Dict[str, Any]) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=json_default)


def write_json(data: Dict[str, Any], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(dumps(data))
        handle.write("\n")


# ==============================
# Measure specs
# ==============================
def load_measure(spec: Union[str, Dict[str, Any]], base_dir: Optional[str] = None,
                 m_cells: Optional[int] = None, seed: Optional[int] = None,
                 allow_files: bool = True) -> Measure:
    """
    Resolve a measure argument: inline spec, datum name, file path, or (from
    JSON configs) an inline grid dictionary. ``seed`` drives the noise of noisy
    datums; ``allow_files=False`` rejects file paths.
    """
    if isinstance(spec, dict):
        return grid_from_dict(spec)
    if not isinstance(spec, str) or not spec.strip():
        raise ValueError("measure spec must be a non-empty string")
    spec = spec.strip()

    if spec.startswith("uniform:"):
        parts = spec.split(":")
        if len(parts) not in (3, 4):
            raise ValueError(f"bad uniform spec {spec!r}, expected uniform:a:b[:M]")
        cells = int(parts[3]) if len(parts) == 4 else (m_cells or DEFAULT_UNIFORM_CELLS)
        return GridDensity1D.uniform(float(parts[1]), float(parts[2]), cells)
    if spec.startswith("delta:"):
        return DiscreteMeasure.dirac(float(spec.split(":", 1)[1]))
    if spec in datum_names():
        return build_datum(spec, m_cells, seed)
    if not allow_files:
        raise ValueError(f"file paths are not accepted here: {spec!r} (use uniform:, delta:, a datum or a grid object)")

    path = spec if base_dir is None or os.path.isabs(spec) else os.path.join(base_dir, spec)
    extension = os.path.splitext(path)[1].lower()
    if not os.path.exists(path):
        raise FileNotFoundError(f"measure file not found: {path}")
    if extension == ".csv":
        return read_measure_csv(path)
    if extension == ".json":
        return read_grid_json(path)
    if extension == ".pgm":
        return ingest_pgm(path)
    raise ValueError(f"cannot read measure from {spec!r}")
