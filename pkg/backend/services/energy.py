"""
Attraction-repulsion energies.

    E[mu] = int int psi_a(x - y) d omega(y) d mu(x) - 1/2 int int psi_r(x - y) d mu(y) d mu(x)

Spatial pair sums, particle gradients, the 1D Fourier representation of the
symmetrized energy and the dissipation functional of the 1D flow live here.
Every pair sum runs over a fixed index order so results are bit-reproducible;
the thread-chunked variant is opt-in (``parallel=True`` or
``ATTREP_PARALLEL_PAIRS``) and only tolerance-equal to the serial sum.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional

import numpy as np
from scipy import integrate
from scipy.spatial.distance import cdist

from .kernels import PowerKernelParams, check_exponent, dq_constant, psi_prime_1d, radial_derivative
from .measures import DiscreteMeasure, MeasureLike, ParticleSystem, as_discrete
from .settings import settings

logger = logging.getLogger(__name__)

# Rows per chunk in the threaded pair sums
PAIR_CHUNK = 256
MASS_MATCH_TOL = 1e-9


# ==============================
# Domain Types
# ==============================
@dataclass(frozen=True)
class EnergyReport:
    """total = attraction + interaction + lam * tv_term."""

    attraction: float
    interaction: float
    total: float
    tv_term: float = 0.0
    lam: float = 0.0
    q_a: Optional[float] = None
    q_r: Optional[float] = None
    n_particles: Optional[int] = None
    datum_constant: Optional[float] = None

    @classmethod
    def assemble(cls, attraction: float, interaction: float, tv_term: float = 0.0,
                 lam: float = 0.0, **meta) -> "EnergyReport":
        # lam = 0 must not turn an infinite TV marker into nan
        regularization = lam * tv_term if lam > 0 else 0.0
        return cls(
            attraction=float(attraction),
            interaction=float(interaction),
            total=float(attraction + interaction + regularization),
            tv_term=float(tv_term),
            lam=float(lam),
            **meta,
        )

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["lambda"] = data.pop("lam")
        if data["datum_constant"] is None:
            data.pop("datum_constant")
        return data


@dataclass(frozen=True)
class FourierQuadrature:
    """
    Quadrature for the Fourier energy on (0, inf).

    The trapezoid rule runs in log(xi) over [xi_min, xi_max]; the piece below
    xi_min is closed with the xi^(1-q) power law of the integrand at the origin
    and the piece above xi_max is integrated exactly term by term (constant part
    analytically, cosine parts with QUADPACK's Fourier-integral routine).
    """

    xi_min: float = 1e-4
    xi_max: float = 16.0
    n_nodes: int = 4000

    def __post_init__(self):
        if not (0 < self.xi_min < self.xi_max):
            raise ValueError("quadrature needs 0 < xi_min < xi_max")
        if self.n_nodes < 2:
            raise ValueError("quadrature needs at least two nodes")


# ==============================
# Helpers
# ==============================
def _atoms(mu: MeasureLike) -> DiscreteMeasure:
    return as_discrete(mu)


def _check_dims(a: DiscreteMeasure, b: DiscreteMeasure) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch ({a.dim} vs {b.dim})")


def _kernel_rows(a: np.ndarray, b: np.ndarray, q: float, wb: np.ndarray) -> np.ndarray:
    return np.power(cdist(a, b), q) @ wb


def _pair_sum(a: np.ndarray, wa: np.ndarray, b: np.ndarray, wb: np.ndarray, q: float,
              parallel: Optional[bool] = None) -> float:
    """sum_i sum_j wa_i wb_j |a_i - b_j|^q."""
    if parallel is None:
        parallel = settings.parallel_pairs
    if not parallel or a.shape[0] <= PAIR_CHUNK:
        return float(wa @ _kernel_rows(a, b, q, wb))
    starts = range(0, a.shape[0], PAIR_CHUNK)
    with ThreadPoolExecutor(max_workers=settings.pair_workers) as pool:
        rows = list(pool.map(lambda s: _kernel_rows(a[s:s + PAIR_CHUNK], b, q, wb), starts))
    return float(wa @ np.concatenate(rows))


def _merge_signed(mu: DiscreteMeasure, omega: DiscreteMeasure):
    """Atoms of mu - omega with coincident locations merged (sorted, 1D)."""
    xs = np.concatenate([mu.points[:, 0], omega.points[:, 0]])
    cs = np.concatenate([mu.weights, -omega.weights])
    locations, inverse = np.unique(xs, return_inverse=True)
    coefficients = np.zeros(locations.size)
    np.add.at(coefficients, inverse, cs)
    return locations, coefficients


# ==============================
# Spatial energies
# ==============================
def attraction_energy(mu: MeasureLike, omega: MeasureLike, q_a: float,
                      parallel: Optional[bool] = None) -> float:
    """
    (1/m_mu) sum_i w_i sum_k w^omega_k psi_a(x_i - y_k).

    For N equal-weight particles this is (1/N) sum_i sum_k w_k |x_i - y_k|^q_a.
    Grid data enter through their midpoint atoms.
    """
    check_exponent(q_a)
    m, w = _atoms(mu), _atoms(omega)
    _check_dims(m, w)
    return _pair_sum(m.points, m.weights, w.points, w.weights, q_a, parallel) / m.mass


def interaction_energy(mu: MeasureLike, q_r: float, parallel: Optional[bool] = None) -> float:
    """-(1/2) sum_i sum_j w_i w_j psi_r(x_i - x_j); the diagonal contributes 0."""
    check_exponent(q_r)
    m = _atoms(mu)
    return -0.5 * _pair_sum(m.points, m.weights, m.points, m.weights, q_r, parallel)


def datum_constant(omega: MeasureLike, q_a: float, parallel: Optional[bool] = None) -> float:
    """C = -(1/2) int int psi_a d omega d omega, the gap between the symmetrized and plain energies."""
    return interaction_energy(omega, q_a, parallel)


def total_energy(mu: MeasureLike, omega: MeasureLike, params: PowerKernelParams,
                 with_datum_constant: bool = False, parallel: Optional[bool] = None) -> EnergyReport:
    attraction = attraction_energy(mu, omega, params.q_a, parallel)
    interaction = interaction_energy(mu, params.q_r, parallel)
    constant = datum_constant(omega, params.q_a, parallel) if with_datum_constant else None
    return EnergyReport.assemble(
        attraction,
        interaction,
        q_a=params.q_a,
        q_r=params.q_r,
        n_particles=len(_atoms(mu)),
        datum_constant=constant,
    )


def _radial_field(x: np.ndarray, y: np.ndarray, q: float) -> np.ndarray:
    """q |x_i - y_k|^(q-2) (x_i - y_k) with 0 on coincident pairs; shape (N, K, d)."""
    diff = x[:, None, :] - y[None, :, :]
    r = np.linalg.norm(diff, axis=-1)
    coef = radial_derivative(q, r) / np.where(r > 0.0, r, 1.0)
    return coef[..., None] * diff


def grad_particles(mu: ParticleSystem, omega: MeasureLike, params: PowerKernelParams) -> np.ndarray:
    """
    Gradient of the particle energy in the positions.

        g_i = (1/N) [ sum_k w_k psi_a'(x_i - y_k) - (1/N) sum_j psi_r'(x_i - x_j) ]

    with the radial derivative q r^(q-1) along (x_i - y)/r and the zero
    selection on coincident points (sgn(0) = 0 for q = 1).
    """
    if not isinstance(mu, ParticleSystem):
        mu = ParticleSystem(_atoms(mu).points)
    w = _atoms(omega)
    if w.dim != mu.dim:
        raise ValueError(f"dimension mismatch ({mu.dim} vs {w.dim})")
    x = mu.positions
    n = mu.n
    pull = np.einsum("k,nkd->nd", w.weights, _radial_field(x, w.points, params.q_a))
    push = _radial_field(x, x, params.q_r).sum(axis=1) / n
    return (pull - push) / n


# ==============================
# Symmetrized and Fourier forms (1D)
# ==============================
def symmetrized_energy(mu: MeasureLike, omega: MeasureLike, q: float) -> float:
    """-(1/2) sum_ij c_i c_j psi(y_i - y_j) over the signed measure mu - omega."""
    m, w = _atoms(mu), _atoms(omega)
    _check_dims(m, w)
    if abs(m.mass - w.mass) > MASS_MATCH_TOL * max(1.0, w.mass):
        raise ValueError(f"mass mismatch ({m.mass} vs {w.mass})")
    check_exponent(q)
    points = np.concatenate([m.points, w.points])
    coefficients = np.concatenate([m.weights, -w.weights])
    return -0.5 * _pair_sum(points, coefficients, points, coefficients, q, parallel=False)


def fourier_energy_1d(mu: MeasureLike, omega: MeasureLike, q: float,
                      quad: Optional[FourierQuadrature] = None) -> float:
    """
    D_q int_R |mu^(xi) - omega^(xi)|^2 |xi|^(-1-q) d xi with mu^(xi) = sum_k w_k e^(-i xi x_k).

    The integrand is even, so 2 D_q int_0^inf is evaluated. Written out,
    |c^|^2 = sum_k c_k^2 + 2 sum_{k<l} c_k c_l cos(xi (x_k - x_l)), which gives the
    closed tails used by ``FourierQuadrature``.
    """
    quad = quad or FourierQuadrature()
    m, w = _atoms(mu), _atoms(omega)
    if m.dim != 1 or w.dim != 1:
        raise ValueError("Fourier energy is implemented in 1D only")
    if abs(m.mass - 1.0) > MASS_MATCH_TOL or abs(w.mass - 1.0) > MASS_MATCH_TOL:
        raise ValueError("Fourier energy needs probability measures")
    d_q = dq_constant(q, 1)
    locations, coefficients = _merge_signed(m, w)
    nonzero = coefficients != 0.0
    locations, coefficients = locations[nonzero], coefficients[nonzero]
    if coefficients.size == 0:
        return 0.0

    s = np.linspace(math.log(quad.xi_min), math.log(quad.xi_max), quad.n_nodes)
    xi = np.exp(s)
    transform = np.exp(-1j * np.outer(xi, locations)) @ coefficients
    integrand = np.abs(transform) ** 2 * xi ** (-1.0 - q)
    body = integrate.trapezoid(integrand * xi, s)

    # |c^|^2 ~ c xi^2 near the origin, so the integrand behaves like c xi^(1-q)
    slope = integrand[0] / quad.xi_min ** (1.0 - q)
    head = slope * quad.xi_min ** (2.0 - q) / (2.0 - q)

    diagonal = float(np.sum(coefficients ** 2))
    tail = diagonal * quad.xi_max ** (-q) / q
    for k in range(locations.size):
        for l in range(k + 1, locations.size):
            gap = locations[l] - locations[k]
            value, _ = integrate.quad(
                lambda t: t ** (-1.0 - q), quad.xi_max, np.inf, weight="cos", wvar=gap
            )
            tail += 2.0 * coefficients[k] * coefficients[l] * value
    return float(2.0 * d_q * (head + body + tail))


# ==============================
# 1D flow functionals
# ==============================
def velocity_1d(x: np.ndarray, y: np.ndarray, omega_mass: float, q_a: float, q_r: float) -> np.ndarray:
    """
    v_j = -m avg_zeta psi_a'(x_j - y_zeta) + avg_zeta psi_r'(x_j - x_zeta)

    on the midpoint quantile grid; ``y`` holds the quantiles of omega / m.
    """
    pull = psi_prime_1d(q_a, x[:, None] - y[None, :]).mean(axis=1)
    push = psi_prime_1d(q_r, x[:, None] - x[None, :]).mean(axis=1)
    return -omega_mass * pull + push


def dissipation(state) -> float:
    """
    D[mu] = int_0^1 |v(z)|^2 dz for a 1D flow state (anything exposing X, Y
    as pseudo-inverses and ``params``), midpoint rule in z and zeta.
    """
    v = velocity_1d(state.X.values, state.Y.values, state.Y.mass, state.params.q_a, state.params.q_r)
    return float(np.mean(v ** 2))
