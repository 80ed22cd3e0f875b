"""
Measure representations and 1D quantile machinery.

Three concrete representations are used throughout the service layer:

- ``DiscreteMeasure``: weighted atoms in R^d (data, particle clouds, image pixels).
- ``GridDensity1D`` / ``GridDensityND``: piecewise-constant densities on uniform grids.
- ``PseudoInverse1D``: the quantile function X(z) sampled at the midpoints
  z_j = (j - 1/2) / M of [0, 1]. In 1D every Wasserstein distance and every
  flow computation is carried out on this representation.

``ParticleSystem`` (N equal-weight positions) also lives here because the
tiling, TV and energy modules all produce or consume it.
"""

from dataclasses import dataclass
from typing import Callable, Sequence, Tuple, Union

import numpy as np


# ==============================
# Domain Types
# ==============================
@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point set; ``points`` has shape (N, d), ``weights`` shape (N,)."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2 or points.shape[1] < 1:
            raise ValueError("points must have shape (N, d) with d >= 1")
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if weights.shape[0] != points.shape[0]:
            raise ValueError(
                f"weights and points differ in length ({weights.shape[0]} vs {points.shape[0]})"
            )
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and nonnegative")
        if not np.all(np.isfinite(points)):
            raise ValueError("points must be finite")
        if weights.sum() <= 0:
            raise ValueError("empty measure")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def __len__(self) -> int:
        return self.points.shape[0]

    @classmethod
    def uniform(cls, points) -> "DiscreteMeasure":
        points = np.asarray(points, dtype=float)
        n = points.shape[0]
        return cls(points, np.full(n, 1.0 / n))

    @classmethod
    def dirac(cls, location, mass: float = 1.0) -> "DiscreteMeasure":
        loc = np.atleast_1d(np.asarray(location, dtype=float))
        return cls(loc.reshape(1, -1), np.array([mass]))

    def shifted(self, c) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points + np.asarray(c, dtype=float), self.weights)

    def scaled(self, s: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points * s, self.weights)


@dataclass(frozen=True, eq=False)
class ParticleSystem:
    """N equal-weight positions; represents mu = (1/N) sum_i delta_{x_i}."""

    positions: np.ndarray

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=float)
        if positions.ndim == 1:
            positions = positions.reshape(-1, 1)
        if positions.ndim != 2 or positions.shape[0] < 1:
            raise ValueError("a particle system needs at least one position")
        if not np.all(np.isfinite(positions)):
            raise ValueError("particle positions must be finite")
        object.__setattr__(self, "positions", positions)

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def __len__(self) -> int:
        return self.n

    def to_measure(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.positions, np.full(self.n, 1.0 / self.n))


@dataclass(frozen=True, eq=False)
class GridDensity1D:
    """Piecewise-constant density with M cells of equal width on [x_min, x_max]."""

    x_min: float
    x_max: float
    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=float).reshape(-1)
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        if cells.size < 1 or np.any(cells < 0) or not np.all(np.isfinite(cells)):
            raise ValueError("cells must be finite, nonnegative and non-empty")
        if cells.sum() <= 0:
            raise ValueError("empty measure")
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "x_max", float(self.x_max))
        object.__setattr__(self, "cells", cells)

    @property
    def dim(self) -> int:
        return 1

    @property
    def m_cells(self) -> int:
        return self.cells.size

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.cells.size

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.cells.size + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return self.x_min + (np.arange(self.cells.size) + 0.5) * self.dx

    @property
    def mass(self) -> float:
        return float(self.cells.sum() * self.dx)

    @classmethod
    def from_function(cls, f: Callable, x_min: float, x_max: float, m_cells: int) -> "GridDensity1D":
        """Sample f at cell midpoints."""
        dx = (x_max - x_min) / m_cells
        mids = x_min + (np.arange(m_cells) + 0.5) * dx
        return cls(x_min, x_max, np.asarray(f(mids), dtype=float))

    @classmethod
    def uniform(cls, a: float, b: float, m_cells: int, mass: float = 1.0) -> "GridDensity1D":
        return cls(a, b, np.full(m_cells, mass / (b - a)))

    def cumulative(self) -> np.ndarray:
        """Unnormalized CDF at the M + 1 cell edges."""
        return np.concatenate(([0.0], np.cumsum(self.cells * self.dx)))

    def to_discrete(self) -> DiscreteMeasure:
        """Midpoint atoms carrying the cell masses."""
        weights = self.cells * self.dx
        keep = weights > 0
        return DiscreteMeasure(self.midpoints[keep].reshape(-1, 1), weights[keep])

    def to_nd(self) -> "GridDensityND":
        return GridDensityND((self.x_min,), (self.x_max,), self.cells.copy())


@dataclass(frozen=True, eq=False)
class GridDensityND:
    """Piecewise-constant density on the box prod_k [lo_k, hi_k]; ``cells`` has shape (M_1, ..., M_d)."""

    lo: Tuple[float, ...]
    hi: Tuple[float, ...]
    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=float)
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if cells.ndim < 1 or len(lo) != cells.ndim or len(hi) != cells.ndim:
            raise ValueError("lo/hi must give one interval per cell axis")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError("every box side needs hi > lo")
        if np.any(cells < 0) or not np.all(np.isfinite(cells)):
            raise ValueError("cells must be finite and nonnegative")
        if cells.sum() <= 0:
            raise ValueError("empty measure")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "cells", cells)

    @property
    def dim(self) -> int:
        return self.cells.ndim

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple((h - l) / n for l, h, n in zip(self.lo, self.hi, self.cells.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def mass(self) -> float:
        return float(self.cells.sum() * self.cell_volume)

    def edges(self, axis: int) -> np.ndarray:
        return np.linspace(self.lo[axis], self.hi[axis], self.cells.shape[axis] + 1)

    def midpoints(self, axis: int) -> np.ndarray:
        e = self.edges(axis)
        return 0.5 * (e[:-1] + e[1:])

    @classmethod
    def uniform(cls, lo: Sequence[float], hi: Sequence[float], cells_per_axis: int) -> "GridDensityND":
        lo, hi = tuple(lo), tuple(hi)
        volume = float(np.prod([h - l for l, h in zip(lo, hi)]))
        shape = (cells_per_axis,) * len(lo)
        return cls(lo, hi, np.full(shape, 1.0 / volume))

    def to_discrete(self) -> DiscreteMeasure:
        grids = np.meshgrid(*[self.midpoints(k) for k in range(self.dim)], indexing="ij")
        points = np.stack([g.reshape(-1) for g in grids], axis=1)
        weights = self.cells.reshape(-1) * self.cell_volume
        keep = weights > 0
        return DiscreteMeasure(points[keep], weights[keep])


@dataclass(frozen=True, eq=False)
class PseudoInverse1D:
    """Quantile values X(z_j) at z_j = (j - 1/2)/M and the mass of the underlying measure."""

    values: np.ndarray
    mass: float = 1.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if values.size < 1:
            raise ValueError("a pseudo-inverse needs at least one grid value")
        if not np.all(np.isfinite(values)):
            raise ValueError("pseudo-inverse values must be finite")
        if self.mass <= 0:
            raise ValueError("empty measure")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mass", float(self.mass))

    @property
    def m_grid(self) -> int:
        return self.values.size

    @property
    def z(self) -> np.ndarray:
        return quantile_grid(self.values.size)

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.values) >= 0.0))

    def to_measure(self) -> DiscreteMeasure:
        """Equal-weight atoms at the grid values carrying total ``mass``."""
        m = self.values.size
        return DiscreteMeasure(self.values.reshape(-1, 1), np.full(m, self.mass / m))


MeasureLike = Union[DiscreteMeasure, ParticleSystem, GridDensity1D, GridDensityND]


# ==============================
# Helpers
# ==============================
def quantile_grid(m_grid: int) -> np.ndarray:
    """Midpoints z_j = (j - 1/2)/M, j = 1..M."""
    if m_grid < 1:
        raise ValueError("grid size must be positive")
    return (np.arange(m_grid) + 0.5) / m_grid


def as_discrete(measure: MeasureLike) -> DiscreteMeasure:
    """Every representation as weighted atoms (grids via midpoint atoms)."""
    if isinstance(measure, DiscreteMeasure):
        return measure
    if isinstance(measure, ParticleSystem):
        return measure.to_measure()
    if isinstance(measure, (GridDensity1D, GridDensityND)):
        return measure.to_discrete()
    if isinstance(measure, PseudoInverse1D):
        return measure.to_measure()
    raise TypeError(f"unsupported measure type {type(measure).__name__}")


def invert_piecewise_linear_cdf(cum: np.ndarray, edges: np.ndarray, targets: np.ndarray,
                                 strict: bool) -> np.ndarray:
    """
    Solve F(x) = t on a CDF that is linear between ``edges`` with values ``cum``.

    strict=True returns inf{x : F(x) > t}; strict=False returns the leftmost
    solution inf{x : F(x) >= t}.
    """
    side = "right" if strict else "left"
    idx = np.searchsorted(cum, targets, side=side)
    idx = np.clip(idx, 1, cum.size - 1)
    lo_cum = cum[idx - 1]
    hi_cum = cum[idx]
    width = edges[idx] - edges[idx - 1]
    span = hi_cum - lo_cum
    frac = np.divide(targets - lo_cum, span, out=np.zeros_like(targets, dtype=float), where=span > 0)
    return edges[idx - 1] + np.clip(frac, 0.0, 1.0) * width


# ==============================
# Operations
# ==============================
def pseudo_inverse(measure: MeasureLike, m_grid: int) -> PseudoInverse1D:
    """
    X(z_j) = inf{x : F(x) > z_j} for the CDF F of measure / mass.

    Atoms resolve the strict inequality exactly: a grid value sitting on an
    atom boundary is assigned to the atom on the right.
    """
    if getattr(measure, "dim", 1) != 1:
        raise ValueError("pseudo-inverse is 1D only")
    z = quantile_grid(m_grid)
    if isinstance(measure, GridDensityND):
        measure = GridDensity1D(measure.lo[0], measure.hi[0], measure.cells)
    if isinstance(measure, GridDensity1D):
        cum = measure.cumulative()
        mass = cum[-1]
        values = invert_piecewise_linear_cdf(cum / mass, measure.edges, z, strict=True)
        return PseudoInverse1D(values, mass)
    atoms = as_discrete(measure)
    order = np.argsort(atoms.points[:, 0], kind="stable")
    xs = atoms.points[order, 0]
    cw = np.cumsum(atoms.weights[order])
    mass = cw[-1]
    idx = np.searchsorted(cw / mass, z, side="right")
    values = xs[np.clip(idx, 0, xs.size - 1)]
    return PseudoInverse1D(values, mass)


def cdf_eval(measure: MeasureLike, x: float) -> float:
    """mu((-inf, x]) (not normalized), right-continuous."""
    if getattr(measure, "dim", 1) != 1:
        raise ValueError("cdf is 1D only")
    if isinstance(measure, GridDensity1D):
        left = measure.edges[:-1]
        frac = np.clip((x - left) / measure.dx, 0.0, 1.0)
        return float(np.sum(frac * measure.cells) * measure.dx)
    atoms = as_discrete(measure)
    return float(atoms.weights[atoms.points[:, 0] <= x].sum())


def wasserstein_p(a: PseudoInverse1D, b: PseudoInverse1D, p: float) -> float:
    """
    ||X - Y||_{L^p(0,1)} with the midpoint rule; p = inf gives the grid maximum,
    a lower bound of the true W_inf with error O(1/M) for Lipschitz pseudo-inverses.
    """
    if a.m_grid != b.m_grid:
        raise ValueError(f"grid sizes differ ({a.m_grid} vs {b.m_grid})")
    if abs(a.mass - 1.0) > 1e-9 or abs(b.mass - 1.0) > 1e-9:
        raise ValueError("Wasserstein defined for probability measures")
    if not (p >= 1):
        raise ValueError(f"p must be in [1, inf], got {p}")
    diff = np.abs(a.values - b.values)
    if np.isinf(p):
        return float(diff.max())
    if p == 1:
        return float(diff.mean())
    return float(np.mean(diff ** p) ** (1.0 / p))


def moment(measure: MeasureLike, r: float) -> float:
    """int |x|^r dmu; exact for atoms, midpoint rule for grids."""
    if r < 0:
        raise ValueError("moment order must be nonnegative")
    atoms = as_discrete(measure)
    norms = np.linalg.norm(atoms.points, axis=1)
    return float(np.sum(atoms.weights * norms ** r))


def mean(measure: MeasureLike) -> np.ndarray:
    atoms = as_discrete(measure)
    return atoms.weights @ atoms.points / atoms.mass


def integrate_pushforward(pi: PseudoInverse1D, f: Callable[[np.ndarray], np.ndarray]) -> float:
    """int f dmu = mass * int_0^1 f(X(z)) dz, midpoint rule on the quantile grid."""
    return float(pi.mass * np.mean(f(pi.values)))


def quantile_particles(measure: MeasureLike, n: int) -> ParticleSystem:
    """N equal-mass particles at the quantile midpoints of a 1D measure."""
    return ParticleSystem(pseudo_inverse(measure, n).values.reshape(-1, 1))
