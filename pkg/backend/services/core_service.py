"""
Core Service Layer - attrep
===========================

Single source of truth for every command. Both front ends consume this layer:

┌─────────────────┐     ┌─────────────────┐
│   attrep.py     │     │ attrep_app.py   │
│  (batch CLI)    │     │  (HTTP API)     │
└────────┬────────┘     └────────┬────────┘
         │                       │
         └───────────┬───────────┘
                     ▼
         ┌─────────────────────┐
         │   core_service.py   │  ← YOU ARE HERE
         └──────────┬──────────┘
                    ▼
   measures · energy · tiling · tv · optimize · flow1d

A command runs from a ``RunConfig`` (built-in defaults < environment < CLI flags
< JSON config file) and returns a plain dict: ``{"command", "config", "result"}``.
When an output directory is given the same document is written to
``result.json`` next to the command's CSV/JSON artifacts. Outputs depend only
on the config, so identical configs give byte-identical files.

USAGE:
    from services.core_service import RunConfig, run_command

    config = RunConfig.resolve("energy", flags={"mu": "mu.csv", "omega": "delta:0"})
    document = run_command(config)
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np
from scipy import stats

from .data_io import grid_to_dict, load_measure, write_json, write_points_csv
from .energy import fourier_energy_1d, symmetrized_energy, total_energy
from .flow1d import FlowConfig, FlowState, diagnose_asymptotics, integrate
from .kernels import PowerKernelParams
from .measures import (
    DiscreteMeasure,
    GridDensity1D,
    GridDensityND,
    ParticleSystem,
    as_discrete,
    pseudo_inverse,
    quantile_particles,
    wasserstein_p,
)
from .optimize import DescentConfig, GridQpProblem, minimize_grid, minimize_particles, random_particles
from .settings import settings
from .tiling import build_tiling, particles_from_tiling, slice_decomposition
from .tv import KernelEstimatorConfig, default_bandwidth, grid_tv, kde_tv, pwc_tv, regularized_energy

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"


# ==============================
# Run Configuration
# ==============================
COMMON_DEFAULTS: Dict[str, Any] = {"seed": None, "out": None}

COMMAND_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "energy": {
        "mu": None, "omega": None, "qa": 1.0, "qr": 1.0, "lambda": 0.0,
        "tv_method": "pwc", "kernel": "hat", "h": None, "n": 100,
        "datum_constant": False, "fourier": False,
    },
    "tv": {"mu": None, "n": 100, "method": "pwc", "kernel": "hat", "h": None},
    "wasserstein": {"mu": None, "omega": None, "p": 2.0, "m_grid": 1000},
    "tile": {"density": None, "n": 16, "d": 1, "lo": 0.0, "hi": 1.0, "cells": 100},
    "minimize": {
        "omega": None, "n": 50, "qa": 1.0, "qr": 1.0, "lambda": 0.0,
        "tv_method": "pwc", "kernel": "hat", "h": None, "init": "tiling",
        "max_iters": None, "grad_tol": 1e-6, "step0": 1.0,
        "grid": False, "m_grid": None, "decay_iters": 1000.0,
    },
    "flow": {
        "mu0": None, "omega": None, "qa": 1.0, "qr": 1.0, "m_grid": 200,
        "dt": 1e-2, "t_end": 1.0, "scheme": "rk4", "sample_dt": None,
        "max_abs": 1e6, "monotone_guard": True, "dump_states": False,
    },
}

REQUIRED = {
    "energy": ("mu", "omega"),
    "tv": ("mu",),
    "wasserstein": ("mu", "omega"),
    "tile": (),
    "minimize": ("omega",),
    "flow": ("mu0", "omega"),
}


def _coerce(key: str, value: Any, default: Any) -> Any:
    if value is None or default is None:
        return value
    try:
        if isinstance(default, bool):
            if isinstance(value, str):
                return value.strip().lower() in {"1", "true", "yes", "on"}
            return bool(value)
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"config value {key}={value!r} has the wrong type") from exc
    return value


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: Dict[str, Any] = field(default_factory=dict)
    # measure arguments restricted to inline specs, datums and grid objects (HTTP)
    inline_only: bool = False

    @property
    def seed(self) -> int:
        return int(self.params["seed"])

    @property
    def output_dir(self) -> Optional[str]:
        return self.params.get("out")

    @classmethod
    def resolve(cls, command: str, flags: Optional[Dict[str, Any]] = None,
                file_config: Optional[Dict[str, Any]] = None,
                use_env_output: bool = True, inline_only: bool = False) -> "RunConfig":
        """Merge defaults < environment < flags < JSON config file, then validate."""
        if command not in COMMAND_DEFAULTS:
            raise ValueError(f"unknown command {command!r}, expected one of {sorted(COMMAND_DEFAULTS)}")
        defaults = {**COMMON_DEFAULTS, **COMMAND_DEFAULTS[command]}
        params = dict(defaults)
        params["seed"] = settings.seed
        if use_env_output:
            params["out"] = settings.output_dir

        for source_name, source in (("flags", flags or {}), ("config", file_config or {})):
            unknown = sorted(set(source) - set(defaults) - {"command"})
            if unknown:
                raise ValueError(f"unknown {source_name} keys for {command}: {', '.join(unknown)}")
            for key, value in source.items():
                if key == "command" or value is None:
                    continue
                params[key] = _coerce(key, value, defaults[key])

        if command == "minimize" and params["max_iters"] is None:
            params["max_iters"] = 5000 if params["grid"] else 500
        missing = [key for key in REQUIRED[command] if params.get(key) is None]
        if missing:
            raise ValueError(f"{command} needs: {', '.join(missing)}")
        params["seed"] = int(params["seed"])
        return cls(command, params, inline_only)

    def to_dict(self) -> Dict[str, Any]:
        return {"command": self.command, **self.params}


# ==============================
# Helpers
# ==============================
def _params_from(config: RunConfig) -> PowerKernelParams:
    return PowerKernelParams(float(config.params["qa"]), float(config.params["qr"]))


def _kernel_cfg(config: RunConfig, n: int, d: int = 1) -> KernelEstimatorConfig:
    h = config.params.get("h")
    return KernelEstimatorConfig(config.params.get("kernel", "hat"), float(h) if h else default_bandwidth(n, d))


def _measure(config: RunConfig, key: str, m_cells: Optional[int] = None):
    return load_measure(config.params[key], m_cells=m_cells, seed=config.seed,
                        allow_files=not config.inline_only)


def _as_particles(measure, n: int) -> ParticleSystem:
    """
    Equal-weight atoms stay as they are; 1D measures are replaced by their
    quantile particles and grids in d > 1 by the centers of an equal-mass tiling.
    """
    if isinstance(measure, DiscreteMeasure) and np.allclose(measure.weights, measure.weights[0]):
        return ParticleSystem(measure.points)
    if isinstance(measure, GridDensityND) and measure.dim > 1:
        return particles_from_tiling(build_tiling(measure, n))
    return quantile_particles(measure, n)


def _w1_to(particles: ParticleSystem, omega) -> Optional[float]:
    if particles.dim != 1:
        return None
    atoms = as_discrete(omega)
    return float(
        stats.wasserstein_distance(particles.positions[:, 0], atoms.points[:, 0], v_weights=atoms.weights)
    )


def _prepare_output(config: RunConfig) -> Optional[str]:
    out = config.output_dir
    if out:
        os.makedirs(out, exist_ok=True)
    return out


def _finish(config: RunConfig, result: Dict[str, Any]) -> Dict[str, Any]:
    document = {"command": config.command, "config": config.to_dict(), "result": result}
    out = _prepare_output(config)
    if out:
        write_json(document, os.path.join(out, "result.json"))
        logger.info(f"[CLI] wrote {os.path.join(out, 'result.json')}")
    return document


# ==============================
# Commands
# ==============================
def run_energy(config: RunConfig) -> Dict[str, Any]:
    """
    Energy report of mu against omega.

    Returns:
        EnergyReport fields; with ``fourier`` also the symmetrized energy and
        its Fourier-quadrature counterpart (1D probability measures, q_a < 2).
    """
    params = _params_from(config)
    mu = _measure(config, "mu")
    omega = _measure(config, "omega")
    lam = float(config.params["lambda"])

    if lam > 0:
        particles = _as_particles(mu, int(config.params["n"]))
        kde_cfg = _kernel_cfg(config, particles.n, particles.dim)
        report = regularized_energy(particles, omega, params, lam, config.params["tv_method"], kde_cfg)
    else:
        report = total_energy(mu, omega, params, with_datum_constant=bool(config.params["datum_constant"]))
    result = report.to_dict()

    if config.params["fourier"]:
        result["symmetrized"] = symmetrized_energy(mu, omega, params.q_a)
        result["fourier"] = fourier_energy_1d(mu, omega, params.q_a)
    return _finish(config, result)


def run_tv(config: RunConfig) -> Dict[str, Any]:
    measure = _measure(config, "mu")
    method = config.params["method"]
    if method == "grid":
        if not isinstance(measure, GridDensity1D):
            raise ValueError("grid total variation needs a 1D grid density")
        return _finish(config, grid_tv(measure).to_dict())
    particles = _as_particles(measure, int(config.params["n"]))
    if method == "pwc":
        report = pwc_tv(particles)
    elif method == "kde":
        report = kde_tv(particles, _kernel_cfg(config, particles.n, particles.dim))
    else:
        raise ValueError(f"unknown tv method {method!r}, expected pwc, kde or grid")
    return _finish(config, {**report.to_dict(), "n_particles": particles.n})


def run_wasserstein(config: RunConfig) -> Dict[str, Any]:
    m_grid = int(config.params["m_grid"])
    a = pseudo_inverse(_measure(config, "mu"), m_grid)
    b = pseudo_inverse(_measure(config, "omega"), m_grid)
    p = float(config.params["p"])
    result = {
        "p": p,
        "distance": wasserstein_p(a, b, p),
        "w1": wasserstein_p(a, b, 1.0),
        "w2": wasserstein_p(a, b, 2.0),
        "winf": wasserstein_p(a, b, np.inf),
        "m_grid": m_grid,
    }
    return _finish(config, result)


def run_tile(config: RunConfig) -> Dict[str, Any]:
    n = int(config.params["n"])
    if config.params.get("density"):
        density = _measure(config, "density")
        if not isinstance(density, (GridDensity1D, GridDensityND)):
            raise ValueError("tilings are built from grid densities")
    else:
        d = int(config.params["d"])
        density = GridDensityND.uniform(
            [float(config.params["lo"])] * d, [float(config.params["hi"])] * d, int(config.params["cells"])
        )
    tiling = build_tiling(density, n)
    n_tilde, m, l = slice_decomposition(n, tiling.dim)
    result = {
        "N": tiling.n,
        "dim": tiling.dim,
        "n_tilde": n_tilde,
        "m": m,
        "l": l,
        "max_mass_error": float(np.max(np.abs(tiling.masses - 1.0 / n))),
        "branch_counts": {",".join(map(str, k)) or "root": v for k, v in sorted(tiling.branch_counts.items())},
    }
    out = _prepare_output(config)
    if out:
        write_json(tiling.to_dict(), os.path.join(out, "tiling.json"))
        write_points_csv(particles_from_tiling(tiling), os.path.join(out, "points.csv"))
    return _finish(config, result)


def _initial_particles(config: RunConfig, omega, n: int) -> ParticleSystem:
    init = config.params["init"]
    if init == "tiling" and isinstance(omega, (GridDensity1D, GridDensityND)):
        return particles_from_tiling(build_tiling(omega, n))
    if init in ("tiling", "quantile") and getattr(omega, "dim", 1) == 1:
        return quantile_particles(omega, n)
    if init in ("tiling", "quantile", "random"):
        atoms = as_discrete(omega)
        return random_particles(n, atoms.points.min(axis=0), atoms.points.max(axis=0), config.seed)
    raise ValueError(f"unknown init {init!r}, expected tiling, quantile or random")


def run_minimize(config: RunConfig) -> Dict[str, Any]:
    cfg = DescentConfig(
        max_iters=int(config.params["max_iters"]),
        grad_tol=float(config.params["grad_tol"]),
        step0=float(config.params["step0"]),
        seed=config.seed,
        decay_iters=float(config.params["decay_iters"]),
    )
    lam = float(config.params["lambda"])
    out = _prepare_output(config)

    if config.params["grid"]:
        omega = _measure(config, "omega", m_cells=config.params["m_grid"])
        if not isinstance(omega, GridDensity1D):
            raise ValueError("the grid problem needs a 1D grid datum")
        u0 = GridDensity1D.uniform(omega.x_min, omega.x_max, omega.m_cells, omega.mass)
        solved = minimize_grid(GridQpProblem(u0, omega, float(config.params["qa"]), lam), cfg)
        if out:
            solved.trace.to_csv(os.path.join(out, "trace.csv"), index=False, float_format=CSV_FLOAT_FORMAT)
        result = {
            "report": solved.report.to_dict(),
            "best_iter": solved.best_iter,
            "tv": grid_tv(solved.density).tv,
            "density": grid_to_dict(solved.density),
        }
        return _finish(config, result)

    omega = _measure(config, "omega")
    params = _params_from(config)
    n = int(config.params["n"])
    mu0 = _initial_particles(config, omega, n)
    kde_cfg = _kernel_cfg(config, n) if config.params["tv_method"] == "kde" else None
    solved = minimize_particles(mu0, omega, params, lam, config.params["tv_method"], cfg, kde_cfg)
    if out:
        solved.trace.to_csv(os.path.join(out, "trace.csv"), index=False, float_format=CSV_FLOAT_FORMAT)
        write_points_csv(solved.particles, os.path.join(out, "points.csv"))
    result = {
        "report": solved.report.to_dict(),
        "converged": solved.converged,
        "iterations": solved.iterations,
        "w1_initial": _w1_to(mu0, omega),
        "w1_final": _w1_to(solved.particles, omega),
    }
    return _finish(config, result)


def run_flow(config: RunConfig) -> Dict[str, Any]:
    m_grid = int(config.params["m_grid"])
    omega = _measure(config, "omega", m_cells=None)
    mu0 = _measure(config, "mu0")
    state0 = FlowState.from_measures(mu0, omega, _params_from(config), m_grid)
    flow_cfg = FlowConfig(
        dt0=float(config.params["dt"]),
        t_end=float(config.params["t_end"]),
        scheme=config.params["scheme"],
        monotone_guard=bool(config.params["monotone_guard"]),
        sample_dt=config.params["sample_dt"],
        max_abs=float(config.params["max_abs"]),
    )
    trajectory = integrate(state0, flow_cfg)
    report = diagnose_asymptotics(trajectory, omega if isinstance(omega, GridDensity1D) else None)

    out = _prepare_output(config)
    if out:
        frame = trajectory.to_frame(np.asarray(report.w2_to_target) if report.w2_to_target else None)
        frame.to_csv(os.path.join(out, "trace.csv"), index=False, float_format=CSV_FLOAT_FORMAT)
        final = DiscreteMeasure(trajectory.final.X.values, np.full(m_grid, 1.0 / m_grid))
        write_points_csv(final, os.path.join(out, "points.csv"))
        if config.params["dump_states"]:
            write_json(
                {"t": trajectory.times, "X": [s.X.values.tolist() for s in trajectory.states]},
                os.path.join(out, "states.json"),
            )
    result = {
        "t_final": trajectory.times[-1],
        "steps": trajectory.steps,
        "energy_final": trajectory.energies[-1].to_dict(),
        "dissipation_final": trajectory.dissipations[-1],
        "mean_final": trajectory.means[-1],
        "steady_at": trajectory.steady_at,
        "diagnostics": report.to_dict(),
    }
    return _finish(config, result)


COMMANDS: Dict[str, Callable[[RunConfig], Dict[str, Any]]] = {
    "energy": run_energy,
    "tv": run_tv,
    "wasserstein": run_wasserstein,
    "tile": run_tile,
    "minimize": run_minimize,
    "flow": run_flow,
}


def run_command(config: RunConfig) -> Dict[str, Any]:
    logger.debug(f"[CLI] running {config.command} (seed={config.seed})")
    return COMMANDS[config.command](config)
