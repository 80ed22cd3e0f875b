import json
import logging
import os
from typing import Dict, List, Optional

import numpy as np

from .measures import GridDensity1D

logger = logging.getLogger(__name__)

BASE_DIR = os.path.dirname(__file__)
# Data lives at <project_root>/public/data; this module is at backend/services
DATA_DIR = os.path.normpath(os.path.join(BASE_DIR, "..", "..", "public", "data"))
DATUMS_PATH = os.path.join(DATA_DIR, "datums.json")

_datum_catalog: Optional[Dict] = None


def _load_json(path: str) -> Optional[Dict]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError:
        logger.error(f"Missing data file: {path}")
    except json.JSONDecodeError as exc:
        logger.error(f"Invalid JSON in {path}: {exc}")
    return None


def initialize_datums() -> bool:
    global _datum_catalog
    _datum_catalog = _load_json(DATUMS_PATH)
    if _datum_catalog:
        logger.info(f"Loaded {len(_datum_catalog.get('datums', []))} built-in datums")
    return bool(_datum_catalog)


def get_datum_definitions() -> List[Dict]:
    if _datum_catalog is None:
        initialize_datums()
    if not _datum_catalog:
        return []
    return _datum_catalog.get("datums", [])


def get_datum_by_id(datum_id: str) -> Optional[Dict]:
    return next((d for d in get_datum_definitions() if d.get("id") == datum_id), None)


def datum_names() -> List[str]:
    return [d.get("id", "") for d in get_datum_definitions()]


def _piecewise_cells(definition: Dict, m_cells: int) -> GridDensity1D:
    """Exact cell averages of a sum of indicator blocks."""
    x_min, x_max = float(definition["x_min"]), float(definition["x_max"])
    edges = np.linspace(x_min, x_max, m_cells + 1)
    dx = (x_max - x_min) / m_cells
    cells = np.zeros(m_cells)
    for piece in definition["pieces"]:
        overlap = np.clip(np.minimum(edges[1:], piece["b"]) - np.maximum(edges[:-1], piece["a"]), 0.0, None)
        cells += piece["height"] * overlap / dx
    return GridDensity1D(x_min, x_max, cells)


def build_datum(datum_id: str, m_cells: Optional[int] = None, seed: Optional[int] = None) -> GridDensity1D:
    """
    Grid density of a built-in datum. Noisy datums add seeded Gaussian noise
    per cell to their base, cut off the negative part and re-normalize to mass 1.
    """
    definition = get_datum_by_id(datum_id)
    if definition is None:
        raise ValueError(f"unknown datum {datum_id!r}, expected one of {datum_names()}")
    cells_wanted = int(m_cells or definition.get("m_cells", 200))
    if "base" not in definition:
        return _piecewise_cells(definition, cells_wanted)

    base = build_datum(definition["base"], cells_wanted)
    rng = np.random.default_rng(definition.get("seed", 0) if seed is None else seed)
    noisy = np.maximum(base.cells + rng.normal(0.0, definition["noise_std"], size=base.m_cells), 0.0)
    noisy = noisy / (noisy.sum() * base.dx)
    return GridDensity1D(base.x_min, base.x_max, noisy)
