"""
Equal-mass quantile tilings of a grid density in R^d.

The box is cut along axis 0 into n_0 slabs, every slab along axis 1, and so
on, each cut placed so that every child holds a share of the parent's mass
proportional to the number of tiles it will contain. The slice counts follow

    N = n~^(d-m) (n~+1)^m + l,    n~ = floor(N^(1/d)),

with the first m axes cut into n~+1 pieces, the middle axes into n~ pieces and,
on the last axis, the first l branches (in lexicographic order) into n~+1 and
the rest into n~. Every tile therefore carries mass 1/N.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple, Union

import numpy as np

from .measures import GridDensity1D, GridDensityND, ParticleSystem, invert_piecewise_linear_cdf

logger = logging.getLogger(__name__)

MultiIndex = Tuple[int, ...]


# ==============================
# Domain Types
# ==============================
@dataclass(frozen=True, eq=False)
class Tiling:
    dim: int
    index_set: List[MultiIndex]
    boxes: np.ndarray           # (N, d, 2): [lo, hi] per axis
    points: np.ndarray          # (N, d) tile centers of mass
    masses: np.ndarray          # (N,) normalized tile masses
    branch_counts: Dict[MultiIndex, int] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.index_set)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dim": self.dim,
            "N": self.n,
            "index_set": [list(i) for i in self.index_set],
            "boxes": [{"lo": box[:, 0].tolist(), "hi": box[:, 1].tolist()} for box in self.boxes],
            "points": self.points.tolist(),
            "masses": self.masses.tolist(),
        }


# ==============================
# Slice counts
# ==============================
def slice_decomposition(n: int, d: int) -> Tuple[int, int, int]:
    """Return (n~, m, l) with N = n~^(d-m) (n~+1)^m + l and m maximal in {0..d-1}."""
    if n < 1:
        raise ValueError("a tiling needs N >= 1")
    if d < 1:
        raise ValueError("dimension must be positive")
    n_tilde = int(round(n ** (1.0 / d)))
    while n_tilde ** d > n:
        n_tilde -= 1
    while (n_tilde + 1) ** d <= n:
        n_tilde += 1
    m = 0
    for candidate in range(d):
        if n_tilde ** (d - candidate) * (n_tilde + 1) ** candidate <= n:
            m = candidate
    l = n - n_tilde ** (d - m) * (n_tilde + 1) ** m
    return n_tilde, m, l


class _SliceCounts:
    """Children per branch of the nested construction."""

    def __init__(self, n: int, d: int):
        self.d = d
        self.n_tilde, self.m, self.l = slice_decomposition(n, d)
        self.axis_counts = [
            self.n_tilde + 1 if k < self.m else self.n_tilde for k in range(d - 1)
        ]
        # block[k] = number of last-axis branches below one node at level k
        self.block = [int(np.prod(self.axis_counts[k:], dtype=np.int64)) for k in range(d)]

    def children(self, level: int, rank: int) -> int:
        if level < self.d - 1:
            return self.axis_counts[level]
        return self.n_tilde + 1 if rank < self.l else self.n_tilde

    def leaves(self, level: int, rank: int) -> int:
        """Tiles below the node at ``level`` whose first last-axis branch has rank ``rank``."""
        size = self.block[level]
        extra = max(0, min(rank + size, self.l) - rank)
        return size * self.n_tilde + extra


# ==============================
# Grid helpers
# ==============================
def _as_nd(density: Union[GridDensity1D, GridDensityND]) -> GridDensityND:
    if isinstance(density, GridDensity1D):
        return density.to_nd()
    if isinstance(density, GridDensityND):
        return density
    raise TypeError("tilings are built from grid densities")


def _overlaps(edges: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Length of [lo, hi] inside every cell."""
    return np.clip(np.minimum(edges[1:], hi) - np.maximum(edges[:-1], lo), 0.0, None)


def _first_moments(edges: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """int over cell cap [lo, hi] of x dx."""
    a = np.clip(edges[:-1], lo, hi)
    b = np.clip(edges[1:], lo, hi)
    return 0.5 * (b * b - a * a)


def _contract(cells: np.ndarray, vectors: List[np.ndarray], keep: int = -1) -> np.ndarray:
    """Contract every axis except ``keep`` with its vector, highest axis first."""
    out = cells
    for axis in range(cells.ndim - 1, -1, -1):
        if axis == keep:
            continue
        out = np.tensordot(out, vectors[axis], axes=([axis], [0]))
    return out


# ==============================
# Operations
# ==============================
def build_tiling(density: Union[GridDensity1D, GridDensityND], n: int) -> Tiling:
    grid = _as_nd(density)
    d = grid.dim
    counts = _SliceCounts(n, d)
    edges = [grid.edges(k) for k in range(d)]
    total = grid.mass
    logger.info(
        f"[TILING] N={n} d={d} n~={counts.n_tilde} m={counts.m} l={counts.l}"
    )

    index_set: List[MultiIndex] = []
    boxes: List[np.ndarray] = []
    branch_counts: Dict[MultiIndex, int] = {}

    def split(level: int, prefix: MultiIndex, rank: int, box: np.ndarray) -> None:
        n_children = counts.children(level, rank)
        branch_counts[prefix] = n_children
        if level < d - 1:
            child_step = counts.block[level + 1]
            child_leaves = [counts.leaves(level + 1, rank + c * child_step) for c in range(n_children)]
        else:
            child_leaves = [1] * n_children

        vectors = [_overlaps(edges[k], box[k, 0], box[k, 1]) for k in range(d)]
        marginal = _contract(grid.cells, vectors, keep=level) * np.diff(edges[level])
        cum = np.concatenate(([0.0], np.cumsum(marginal)))
        fractions = np.cumsum(child_leaves)[:-1] / float(sum(child_leaves))
        if cum[-1] > 0:
            cuts = invert_piecewise_linear_cdf(cum / cum[-1], edges[level], fractions, strict=False)
        else:
            cuts = box[level, 0] + fractions * (box[level, 1] - box[level, 0])
        bounds = np.concatenate(([box[level, 0]], cuts, [box[level, 1]]))

        for c in range(n_children):
            child = box.copy()
            child[level] = (bounds[c], bounds[c + 1])
            if level == d - 1:
                index_set.append(prefix + (c,))
                boxes.append(child)
            else:
                split(level + 1, prefix + (c,), rank + c * counts.block[level + 1], child)

    root = np.array([[grid.lo[k], grid.hi[k]] for k in range(d)], dtype=float)
    split(0, (), 0, root)

    box_array = np.array(boxes)
    points = np.empty((len(boxes), d))
    masses = np.empty(len(boxes))
    for t, box in enumerate(box_array):
        vectors = [_overlaps(edges[k], box[k, 0], box[k, 1]) for k in range(d)]
        mass = float(_contract(grid.cells, vectors))
        masses[t] = mass / total
        for axis in range(d):
            if mass <= 0:
                points[t, axis] = 0.5 * (box[axis, 0] + box[axis, 1])
                continue
            weighted = list(vectors)
            weighted[axis] = _first_moments(edges[axis], box[axis, 0], box[axis, 1])
            points[t, axis] = float(_contract(grid.cells, weighted)) / mass

    return Tiling(
        dim=d,
        index_set=index_set,
        boxes=box_array,
        points=points,
        masses=masses,
        branch_counts=branch_counts,
    )


def particles_from_tiling(tiling: Tiling) -> ParticleSystem:
    return ParticleSystem(tiling.points.copy())
