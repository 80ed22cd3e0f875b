"""
Minimizers for the particle energy and for the grid-discretized regularized problem.

Particles: Armijo backtracking descent along -N * grad, the gradient of the
equal-weight energy rescaled so the step size does not depend on N. A total
variation term (pwc or kde) is added through its (sub)gradient.

Grid: projected subgradient on

    minimize (u - w)^T A (u - w) + lam * sum_i |u_{i+1} - u_i|
    subject to u >= 0, sum_i u_i = mass / dx

with A_jk = -(1/2) psi(q, dx (j - k)) dx^2, iterates kept feasible by the
Euclidean projection onto the scaled simplex.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd
from scipy import linalg

from .energy import EnergyReport, grad_particles, total_energy
from .errors import NumericalFailure
from .kernels import PowerKernelParams, check_exponent
from .measures import GridDensity1D, MeasureLike, ParticleSystem
from .tv import KernelEstimatorConfig, grid_tv, regularized_energy, tv_gradient

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["iter", "energy", "grad_norm", "step"]
GRID_TRACE_COLUMNS = ["iter", "energy", "best_energy", "grad_norm", "step"]


# ==============================
# Domain Types
# ==============================
@dataclass(frozen=True)
class DescentConfig:
    max_iters: int = 500
    grad_tol: float = 1e-6
    step0: float = 1.0
    backtrack_factor: float = 0.5
    armijo_c: float = 1e-4
    seed: int = 0
    max_backtracks: int = 60
    # time scale of the diminishing grid step step0 / (L sqrt(1 + t / decay_iters))
    decay_iters: float = 1000.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not self.step0 > 0:
            raise ValueError("step0 must be positive")
        if not (0 < self.backtrack_factor < 1):
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not (0 < self.armijo_c < 1):
            raise ValueError("armijo_c must lie in (0, 1)")
        if not self.decay_iters > 0:
            raise ValueError("decay_iters must be positive")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class GridQpProblem:
    u0: GridDensity1D
    w: GridDensity1D
    q: float
    lam: float = 0.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        check_exponent(self.q)
        same_grid = (
            self.u0.m_cells == self.w.m_cells
            and math.isclose(self.u0.x_min, self.w.x_min)
            and math.isclose(self.u0.x_max, self.w.x_max)
        )
        if not same_grid:
            raise ValueError("u0 and w must share one grid")
        if self.w.m_cells < 2:
            raise ValueError("grid problem needs at least two cells")


@dataclass(frozen=True, eq=False)
class DescentResult:
    particles: ParticleSystem
    report: EnergyReport
    trace: pd.DataFrame
    converged: bool
    iterations: int


@dataclass(frozen=True, eq=False)
class GridResult:
    density: GridDensity1D
    report: EnergyReport
    trace: pd.DataFrame
    best_iter: int


def random_particles(n: int, lo, hi, seed: int = 0) -> ParticleSystem:
    """N uniform draws in the box [lo, hi] from a seeded generator."""
    rng = np.random.default_rng(seed)
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    return ParticleSystem(rng.uniform(lo, hi, size=(n, lo.size)))


# ==============================
# Particle descent
# ==============================
def minimize_particles(mu0: ParticleSystem, omega: MeasureLike, params: PowerKernelParams,
                       lam: float = 0.0, tv_method: str = "pwc",
                       cfg: Optional[DescentConfig] = None,
                       kde_cfg: Optional[KernelEstimatorConfig] = None) -> DescentResult:
    """
    Backtracking descent; every accepted step satisfies

        f(x + t d) <= f(x) - c t N ||g||^2,   d = -N g,

    so the energy trace is non-increasing. Stops when ||g||_inf <= grad_tol
    (converged), when max_iters is hit, or when backtracking finds no
    admissible step.
    """
    cfg = cfg or DescentConfig()
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    regularized = lam > 0
    if regularized and mu0.dim != 1:
        raise ValueError("TV-regularized descent is implemented for d = 1 only")

    def objective(x: np.ndarray) -> float:
        mu = ParticleSystem(x)
        if regularized:
            return regularized_energy(mu, omega, params, lam, tv_method, kde_cfg).total
        return total_energy(mu, omega, params).total

    def gradient(x: np.ndarray) -> np.ndarray:
        mu = ParticleSystem(x)
        g = grad_particles(mu, omega, params)
        if regularized:
            g = g + lam * tv_gradient(mu, tv_method, kde_cfg)
        return g

    x = mu0.positions.copy()
    n = x.shape[0]
    f = objective(x)
    if not np.isfinite(f):
        raise ValueError("non-finite energy at the initial configuration")

    rows = []
    converged = False
    step = cfg.step0
    iterations = 0
    for it in range(cfg.max_iters):
        g = gradient(x)
        grad_norm = float(np.max(np.abs(g)))
        if not np.isfinite(grad_norm):
            raise NumericalFailure(f"non-finite gradient at iteration {it}")
        rows.append((it, f, grad_norm, step if it else 0.0))
        if grad_norm <= cfg.grad_tol:
            converged = True
            break

        direction = -n * g
        decrease = n * float(np.sum(g * g))
        step = min(cfg.step0, 2.0 * step)
        for _ in range(cfg.max_backtracks):
            candidate = x + step * direction
            f_new = objective(candidate)
            if f_new <= f - cfg.armijo_c * step * decrease:
                break
            step *= cfg.backtrack_factor
        else:
            logger.warning(f"[OPTIMIZE] backtracking stalled at iteration {it}, |g|={grad_norm:.3e}")
            break
        x, f = candidate, f_new
        iterations = it + 1
        logger.debug(f"[OPTIMIZE] iter={it} energy={f:.10g} |g|={grad_norm:.3e} step={step:.3e}")
    else:
        g = gradient(x)
        grad_norm = float(np.max(np.abs(g)))
        rows.append((cfg.max_iters, f, grad_norm, step))
        converged = grad_norm <= cfg.grad_tol

    logger.info(
        f"[OPTIMIZE] particles N={n} iterations={iterations} converged={converged} energy={f:.10g}"
    )
    final = ParticleSystem(x)
    report = regularized_energy(final, omega, params, lam, tv_method, kde_cfg)
    return DescentResult(
        particles=final,
        report=report,
        trace=pd.DataFrame(rows, columns=TRACE_COLUMNS),
        converged=converged,
        iterations=iterations,
    )


# ==============================
# Grid problem
# ==============================
def project_simplex(v, mass: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {u >= 0, sum u = mass} by the sorted threshold rule."""
    if not mass > 0:
        raise ValueError("simplex mass must be positive")
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u) - mass
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - cssv / ind > 0)[0][-1]
    theta = cssv[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def interaction_matrix(m_cells: int, dx: float, q: float) -> np.ndarray:
    """A_jk = -(1/2) |dx (j - k)|^q dx^2."""
    offsets = dx * np.abs(np.subtract.outer(np.arange(m_cells), np.arange(m_cells)))
    return -0.5 * np.power(offsets, q) * dx * dx


def _tv_subgradient(u: np.ndarray) -> np.ndarray:
    s = np.sign(np.diff(u))
    g = np.zeros_like(u)
    g[:-1] -= s
    g[1:] += s
    return g


def minimize_grid(problem: GridQpProblem, cfg: Optional[DescentConfig] = None) -> GridResult:
    """
    Projected subgradient with steps step0 / (L sqrt(1 + t / decay_iters)),
    L = 2 lambda_max(P A P) on zero-sum directions. Returns the best iterate.
    """
    cfg = cfg or DescentConfig(max_iters=5000)
    w = problem.w
    dx = w.dx
    m_cells = w.m_cells
    total = float(w.cells.sum())
    a = interaction_matrix(m_cells, dx, problem.q)
    proj = np.eye(m_cells) - 1.0 / m_cells
    top = linalg.eigvalsh(proj @ a @ proj, subset_by_index=[m_cells - 1, m_cells - 1])[0]
    lipschitz = 2.0 * max(float(top), np.finfo(float).tiny)

    def objective(u: np.ndarray) -> float:
        diff = u - w.cells
        return float(diff @ a @ diff) + problem.lam * float(np.abs(np.diff(u)).sum())

    u = project_simplex(problem.u0.cells, total)
    f = objective(u)
    best_u, best_f, best_iter = u.copy(), f, 0
    rows = [(0, f, best_f, 0.0, 0.0)]
    for t in range(1, cfg.max_iters + 1):
        g = 2.0 * a @ (u - w.cells)
        if problem.lam > 0:
            g = g + problem.lam * _tv_subgradient(u)
        alpha = cfg.step0 / (lipschitz * math.sqrt(1.0 + t / cfg.decay_iters))
        u = project_simplex(u - alpha * g, total)
        f = objective(u)
        if f < best_f:
            best_u, best_f, best_iter = u.copy(), f, t
        rows.append((t, f, best_f, float(np.max(np.abs(g))), alpha))

    logger.info(
        f"[OPTIMIZE] grid M={m_cells} lam={problem.lam:g} best_iter={best_iter} objective={best_f:.6g}"
    )
    density = GridDensity1D(w.x_min, w.x_max, best_u)
    interaction = float(best_u @ a @ best_u)
    attraction = float(-2.0 * best_u @ a @ w.cells + w.cells @ a @ w.cells)
    report = EnergyReport.assemble(
        attraction,
        interaction,
        tv_term=grid_tv(best_u).tv,
        lam=problem.lam,
        q_a=problem.q,
        q_r=problem.q,
        n_particles=m_cells,
    )
    return GridResult(
        density=density,
        report=report,
        trace=pd.DataFrame(rows, columns=GRID_TRACE_COLUMNS),
        best_iter=best_iter,
    )
