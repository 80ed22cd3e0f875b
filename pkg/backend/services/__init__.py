# Services package - Shared numerical core
#
# This package provides the services behind both the batch CLI and the HTTP API:
# - measures / kernels: measure types, pseudo-inverses, power kernels
# - energy / tv: attraction-repulsion energies and total-variation regularizers
# - tiling / optimize / flow1d: quantization, minimizers, 1D gradient flow
# - core_service: command layer shared by attrep.py and attrep_app.py

from .core_service import RunConfig, run_command
from .energy import EnergyReport, total_energy
from .errors import FlowAborted, MonotonicityError, NumericalFailure
from .kernels import PowerKernelParams
from .measures import DiscreteMeasure, GridDensity1D, GridDensityND, ParticleSystem
from .settings import settings

__all__ = [
    "RunConfig",
    "run_command",
    "EnergyReport",
    "total_energy",
    "FlowAborted",
    "MonotonicityError",
    "NumericalFailure",
    "PowerKernelParams",
    "DiscreteMeasure",
    "GridDensity1D",
    "GridDensityND",
    "ParticleSystem",
    "settings",
]
