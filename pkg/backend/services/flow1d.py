"""
1D Wasserstein gradient flow of the attraction-repulsion energy in quantile coordinates.

With X(t, z) the pseudo-inverse of mu(t) and Y(z) that of omega / m, the flow reads

    d/dt X(z) = -m int_0^1 psi_a'(X(z) - Y(zeta)) dzeta + int_0^1 psi_r'(X(z) - X(zeta)) dzeta

and is integrated on the midpoint grid z_j = (j - 1/2)/M with explicit Euler or
RK4, rejecting steps that would break the monotonicity of X.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from scipy import optimize, stats
from scipy.integrate import trapezoid

from .energy import EnergyReport, dissipation, total_energy, velocity_1d
from .errors import FlowAborted, MonotonicityError
from .kernels import PowerKernelParams, psi_prime_1d
from .measures import (
    DiscreteMeasure,
    GridDensity1D,
    MeasureLike,
    PseudoInverse1D,
    pseudo_inverse,
    quantile_grid,
    wasserstein_p,
)

logger = logging.getLogger(__name__)

SCHEMES = ("euler", "rk4")
TRAJECTORY_COLUMNS = ["t", "energy", "dissipation", "w2_to_target", "mean"]
# velocities below this (relative to |X|_inf) are rounding noise of a steady state
STEADY_RTOL = 64.0 * np.finfo(float).eps


# ==============================
# Domain Types
# ==============================
@dataclass(frozen=True, eq=False)
class FlowState:
    t: float
    X: PseudoInverse1D
    Y: PseudoInverse1D
    params: PowerKernelParams

    def __post_init__(self):
        if self.params.dim != 1:
            raise ValueError("the flow is implemented in 1D only")
        if self.X.m_grid != self.Y.m_grid:
            raise ValueError("X and Y must share the quantile grid")
        if not math.isfinite(self.t):
            raise ValueError("flow time must be finite")

    @classmethod
    def from_measures(cls, mu0: MeasureLike, omega: MeasureLike, params: PowerKernelParams,
                      m_grid: int) -> "FlowState":
        X = pseudo_inverse(mu0, m_grid)
        if abs(X.mass - 1.0) > 1e-9:
            raise ValueError("the initial measure must be a probability measure")
        Y = pseudo_inverse(omega, m_grid)
        # a probability datum stays exactly 1 so that X = Y cancels to v = 0 bit for bit
        if abs(Y.mass - 1.0) <= 1e-9:
            Y = PseudoInverse1D(Y.values, 1.0)
        return cls(0.0, PseudoInverse1D(X.values, 1.0), Y, params)

    @property
    def omega_mass(self) -> float:
        return self.Y.mass

    def with_values(self, t: float, values: np.ndarray) -> "FlowState":
        return dataclasses.replace(self, t=t, X=PseudoInverse1D(values, 1.0))


@dataclass(frozen=True)
class FlowConfig:
    dt0: float = 1e-2
    t_end: float = 1.0
    scheme: str = "rk4"
    monotone_guard: bool = True
    tol_steady: float = 1e-10
    sample_dt: Optional[float] = None
    max_abs: float = 1e6
    max_halvings: int = 30
    record_states: bool = True

    def __post_init__(self):
        if not self.dt0 > 0:
            raise ValueError("dt0 must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}, expected one of {SCHEMES}")
        if self.sample_dt is not None and not self.sample_dt > 0:
            raise ValueError("sample_dt must be positive")

    @property
    def sampling(self) -> float:
        return self.sample_dt if self.sample_dt is not None else 10.0 * self.dt0

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        data["sample_dt"] = self.sampling
        return data


@dataclass(eq=False)
class Trajectory:
    times: List[float] = field(default_factory=list)
    states: List[FlowState] = field(default_factory=list)
    energies: List[EnergyReport] = field(default_factory=list)
    dissipations: List[float] = field(default_factory=list)
    means: List[float] = field(default_factory=list)
    steps: int = 0
    # first sample time with dissipation <= FlowConfig.tol_steady
    steady_at: Optional[float] = None

    @property
    def final(self) -> FlowState:
        return self.states[-1]

    def energy_values(self) -> np.ndarray:
        return np.array([e.total for e in self.energies])

    def to_frame(self, w2_to_target: Optional[np.ndarray] = None) -> pd.DataFrame:
        w2 = w2_to_target if w2_to_target is not None else np.full(len(self.times), np.nan)
        return pd.DataFrame(
            {
                "t": self.times,
                "energy": self.energy_values(),
                "dissipation": self.dissipations,
                "w2_to_target": w2,
                "mean": self.means,
            },
            columns=TRAJECTORY_COLUMNS,
        )


@dataclass(frozen=True)
class AsymptoticsReport:
    regime: str
    subsequence_range: bool        # 1 < q_a = q_r < 4/3
    repulsion_weaker: bool         # q_r < q_a
    energy_monotone: bool
    energy_drop: float
    dissipation_integral: float
    w2_to_target: Optional[List[float]] = None
    fitted_rate: Optional[float] = None
    tail_mass: Optional[float] = None
    note: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


# ==============================
# Right-hand side
# ==============================
def _interpolated_cdf(Y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """
    Piecewise-linear CDF of omega / m through (Y_j, z_j), closed with half a
    grid spacing on either side.
    """
    m_grid = Y.size
    z = quantile_grid(m_grid)
    if m_grid > 1:
        left = Y[0] - 0.5 * (Y[1] - Y[0])
        right = Y[-1] + 0.5 * (Y[-1] - Y[-2])
    else:
        left, right = Y[0], Y[0]
    xp = np.concatenate(([left], Y, [right]))
    fp = np.concatenate(([0.0], z, [1.0]))
    return np.interp(x, xp, fp, left=0.0, right=1.0)


def rhs(state: FlowState) -> np.ndarray:
    """
    Velocity of every quantile node.

    For q_r = 1 and strictly increasing X the repulsion integral is exactly
    2 z_j - 1; for q_a = 1 the attraction is taken from the interpolated CDF
    G of omega, psi_a' * omega = 2 m G - m, which is Lipschitz in X.
    Non-monotone X falls back to the quadrature form.
    """
    X = state.X.values
    Y = state.Y.values
    m = state.omega_mass
    q_a, q_r = state.params.q_a, state.params.q_r
    if q_r == 1.0 and np.all(np.diff(X) > 0):
        repulsion = 2.0 * quantile_grid(X.size) - 1.0
        if q_a == 1.0:
            attraction = m * (2.0 * _interpolated_cdf(Y, X) - 1.0)
        else:
            attraction = m * psi_prime_1d(q_a, X[:, None] - Y[None, :]).mean(axis=1)
        return -attraction + repulsion
    return velocity_1d(X, Y, m, q_a, q_r)


def _advance(state: FlowState, dt: float, scheme: str, k1: np.ndarray) -> np.ndarray:
    X = state.X.values
    if scheme == "euler":
        return X + dt * k1
    k2 = rhs(state.with_values(state.t + 0.5 * dt, X + 0.5 * dt * k1))
    k3 = rhs(state.with_values(state.t + 0.5 * dt, X + 0.5 * dt * k2))
    k4 = rhs(state.with_values(state.t + dt, X + dt * k3))
    return X + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(state: FlowState, dt: float, scheme: str = "rk4", monotone_guard: bool = True,
         max_halvings: int = 30) -> FlowState:
    """
    One explicit step. With the guard on, an update that breaks monotonicity is
    rejected and retried with dt / 2; the returned state's t tells how far it got.

    A state whose velocity is at rounding level is steady and does not move:
    psi' is not Lipschitz at 0 for q < 2, so the inner RK stages would
    otherwise amplify the rounding noise.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}, expected one of {SCHEMES}")
    k1 = rhs(state)
    X = state.X.values
    if np.max(np.abs(k1)) <= STEADY_RTOL * max(1.0, float(np.max(np.abs(X)))):
        return state.with_values(state.t + dt, X)
    for halving in range(max_halvings + 1):
        values = _advance(state, dt, scheme, k1)
        if not np.all(np.isfinite(values)):
            raise FlowAborted(f"non-finite positions at t={state.t}", t=state.t)
        if not monotone_guard or np.all(np.diff(values) >= 0.0):
            if halving:
                logger.debug(f"[FLOW] step accepted after {halving} halvings, dt={dt:.3e}")
            return state.with_values(state.t + dt, values)
        dt *= 0.5
    raise MonotonicityError("monotonicity could not be preserved")


# ==============================
# Trajectories
# ==============================
def energy_of_state(state: FlowState) -> EnergyReport:
    """Energy of mu = (1/M) sum delta_{X_j} against omega = (m/M) sum delta_{Y_j}."""
    m_grid = state.X.m_grid
    mu = DiscreteMeasure(state.X.values, np.full(m_grid, 1.0 / m_grid))
    omega = DiscreteMeasure(state.Y.values, np.full(m_grid, state.omega_mass / m_grid))
    return total_energy(mu, omega, state.params, parallel=False)


def integrate(state0: FlowState, cfg: FlowConfig) -> Trajectory:
    """
    Integrate to cfg.t_end, recording energy, dissipation and mean at
    multiples of the sampling interval (and at t_end).
    """
    trajectory = Trajectory()

    def record(state: FlowState) -> None:
        trajectory.times.append(state.t)
        trajectory.states.append(state)
        trajectory.energies.append(energy_of_state(state))
        trajectory.dissipations.append(dissipation(state))
        trajectory.means.append(float(state.X.values.mean()))
        if trajectory.steady_at is None and trajectory.dissipations[-1] <= cfg.tol_steady:
            trajectory.steady_at = state.t

    state = state0
    record(state)
    sampling = cfg.sampling
    n_samples = max(1, int(math.ceil(cfg.t_end / sampling - 1e-9))) if cfg.t_end > 0 else 0
    for k in range(1, n_samples + 1):
        target = min(k * sampling, cfg.t_end)
        while state.t < target - 1e-12 * max(1.0, target):
            dt = min(cfg.dt0, target - state.t)
            state = step(state, dt, cfg.scheme, cfg.monotone_guard, cfg.max_halvings)
            trajectory.steps += 1
            largest = float(np.max(np.abs(state.X.values)))
            if largest > cfg.max_abs:
                logger.warning(f"[FLOW] aborted at t={state.t:.4g}: |X|_inf={largest:.3e}")
                raise FlowAborted(
                    f"|X|_inf exceeded {cfg.max_abs:g} at t={state.t:.6g}",
                    t=state.t,
                    max_abs=largest,
                )
        state = dataclasses.replace(state, t=target)
        record(state)
    if not cfg.record_states:
        trajectory.states = [trajectory.states[0], trajectory.states[-1]]
    logger.info(
        f"[FLOW] M={state0.X.m_grid} q_a={state0.params.q_a} q_r={state0.params.q_r} "
        f"t_end={cfg.t_end} steps={trajectory.steps} samples={len(trajectory.times)}"
    )
    return trajectory


# ==============================
# Steady states (q_r = 1)
# ==============================
def _attraction_field(omega: GridDensity1D, q_a: float, x: np.ndarray) -> np.ndarray:
    """(psi_a' * omega)(x) = sum_i omega_i (|x - c_i|^q - |x - d_i|^q) over cells [c_i, d_i]."""
    edges = omega.edges
    c, d = edges[:-1], edges[1:]
    x = np.asarray(x, dtype=float)[:, None]
    return (np.abs(x - c) ** q_a - np.abs(x - d) ** q_a) @ omega.cells


def steady_state_qr1(omega: GridDensity1D, q_a: float) -> GridDensity1D:
    """
    Density balancing a unit-speed repulsion (q_r = 1) against the attraction of omega:
    half the derivative of psi_a' * omega wherever that field lies in [-1, 1].

    Cell values are exact cell averages, diff(clip(V'(edges), -1, 1)) / (2 dx).
    The grid is extended with the same spacing when the steady state reaches
    beyond omega's window (possible for q_a > 1).
    """
    PowerKernelParams(q_a, 1.0)
    mass = omega.mass
    if q_a == 1.0 and mass < 1.0 - 1e-12:
        raise ValueError("no steady state (mass escapes)")
    dx = omega.dx

    def field_at(x: float) -> float:
        return float(_attraction_field(omega, q_a, np.array([x]))[0])

    lo, hi = omega.x_min, omega.x_max
    # for q_a = 1 the field is constant (-m, +m) outside the support, no extension needed
    if q_a > 1.0 and field_at(lo) > -1.0:
        span = dx
        while field_at(lo - span) > -1.0:
            span *= 2.0
        a = optimize.brentq(lambda x: field_at(x) + 1.0, lo - span, lo)
        lo -= math.ceil((omega.x_min - a) / dx - 1e-9) * dx
    if q_a > 1.0 and field_at(hi) < 1.0:
        span = dx
        while field_at(hi + span) < 1.0:
            span *= 2.0
        b = optimize.brentq(lambda x: field_at(x) - 1.0, hi, hi + span)
        hi += math.ceil((b - omega.x_max) / dx - 1e-9) * dx

    m_cells = int(round((hi - lo) / dx))
    edges = lo + dx * np.arange(m_cells + 1)
    clipped = np.clip(_attraction_field(omega, q_a, edges), -1.0, 1.0)
    cells = np.diff(clipped) / (2.0 * dx)
    return GridDensity1D(edges[0], edges[-1], cells)


# ==============================
# Diagnostics
# ==============================
def _regime(q_a: float, q_r: float) -> str:
    if q_r == 1.0:
        return "steady-state"
    if q_a == q_r == 2.0:
        return "traveling-wave"
    if 1.0 < q_a == q_r < 4.0 / 3.0:
        return "subsequence-convergence"
    return "open"


def diagnose_asymptotics(trajectory: Trajectory, omega: Optional[GridDensity1D] = None,
                         tail_window: float = 1.0) -> AsymptoticsReport:
    """
    Long-time report of a trajectory.

    - q_r = 1: W2(mu(t), steady state) per sample when omega is given as a grid;
      for q_a = 1 and m < 1 no steady state exists and the mass found beyond
      ``tail_window`` of omega's support is reported instead.
    - q_a = q_r = 2: exponential rate of the mean gap, fitted on log |gap|.
    - otherwise: energy drop against the integrated dissipation.
    """
    first = trajectory.states[0]
    q_a, q_r = first.params.q_a, first.params.q_r
    m = first.omega_mass
    energies = trajectory.energy_values()
    times = np.asarray(trajectory.times)
    monotone = bool(np.all(np.diff(energies) <= 1e-8))
    energy_drop = float(energies[0] - energies[-1])
    dissipation_integral = float(trapezoid(trajectory.dissipations, times)) if times.size > 1 else 0.0
    w2 = None
    rate = None
    tail = None
    note = ""

    if q_r == 1.0:
        if q_a == 1.0 and m < 1.0 - 1e-12:
            y = first.Y.values
            final = trajectory.final.X.values
            outside = (final < y.min() - tail_window) | (final > y.max() + tail_window)
            tail = float(np.mean(outside))
            note = "no steady state; mass escapes to infinity"
        elif omega is not None:
            target = pseudo_inverse(steady_state_qr1(omega, q_a), first.X.m_grid)
            target = PseudoInverse1D(target.values, 1.0)
            if len(trajectory.states) == len(times):
                w2 = [wasserstein_p(s.X, target, 2) for s in trajectory.states]
            else:
                note = "per-sample states were not recorded"
    elif q_a == q_r == 2.0:
        # d/dt mean = -2 m (mean - mean(Y)), so the gap decays like exp(-2 m t)
        gaps = np.abs(np.asarray(trajectory.means) - float(first.Y.values.mean()))
        usable = gaps > 1e-12
        if np.count_nonzero(usable) >= 2:
            fit = stats.linregress(times[usable], np.log(gaps[usable]))
            rate = float(-fit.slope)
    else:
        note = "no convergence statement for this regime; energy and dissipation only"

    return AsymptoticsReport(
        regime=_regime(q_a, q_r),
        subsequence_range=bool(1.0 < q_a == q_r < 4.0 / 3.0),
        repulsion_weaker=bool(q_r < q_a),
        energy_monotone=monotone,
        energy_drop=energy_drop,
        dissipation_integral=dissipation_integral,
        w2_to_target=w2,
        fitted_rate=rate,
        tail_mass=tail,
        note=note,
    )
