"""
Power kernels psi(x) = |x|^q, their 1D derivatives and the constant D_q of
the Fourier representation of the energy.
"""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class PowerKernelParams:
    q_a: float
    q_r: float
    dim: int = 1

    def __post_init__(self):
        for name in ("q_a", "q_r"):
            value = getattr(self, name)
            if not (1.0 <= value <= 2.0):
                raise ValueError(f"{name} must lie in [1, 2], got {value}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")


def check_exponent(q: float) -> None:
    if not (1.0 <= q <= 2.0):
        raise ValueError(f"kernel exponent q must lie in [1, 2], got {q}")


def psi(q: float, x) -> ArrayLike:
    """
    |x|^q with the Euclidean norm over the last axis.

    A scalar is treated as a 1-vector, so psi(1.5, 4.0) == 8.0. For batches pass
    an array of shape (..., d).
    """
    check_exponent(q)
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return abs(float(arr)) ** q
    r = np.linalg.norm(arr, axis=-1)
    out = r ** q
    return float(out) if np.ndim(out) == 0 else out


def psi_prime_1d(q: float, x: ArrayLike) -> ArrayLike:
    """
    q |x|^(q-2) x, written as q |x|^(q-1) sgn(x) so that x = 0 gives 0 for every
    q in [1, 2] (for q = 1 this is the sgn(0) = 0 selection).
    """
    check_exponent(q)
    arr = np.asarray(x, dtype=float)
    out = q * np.power(np.abs(arr), q - 1.0) * np.sign(arr)
    return float(out) if out.ndim == 0 else out


def radial_derivative(q: float, r: ArrayLike) -> ArrayLike:
    """q r^(q-1) for r > 0, 0 at r = 0."""
    r = np.asarray(r, dtype=float)
    return np.where(r > 0.0, q * np.power(np.where(r > 0.0, r, 1.0), q - 1.0), 0.0)


def _gamma_reflected(z: float) -> float:
    # Gamma(z) = pi / (sin(pi z) Gamma(1 - z)) for non-integer z < 0
    if z > 0:
        return float(special.gamma(z))
    return math.pi / (math.sin(math.pi * z) * float(special.gamma(1.0 - z)))


def dq_constant(q: float, d: int) -> float:
    """
    D_q = -(2 pi)^(-d/2) 2^(q + d/2) Gamma((d+q)/2) / (2 Gamma(-q/2)), positive on (0, 2).

    At q = 2 the kernel is a polynomial and its generalized Fourier transform
    vanishes, so no representation exists there.
    """
    if d < 1 or int(d) != d:
        raise ValueError(f"dimension must be a positive integer, got {d}")
    if q == 2.0:
        raise ValueError("Fourier form degenerate at q=2")
    if not (0.0 < q < 2.0):
        raise ValueError(f"D_q is defined for q in (0, 2), got {q}")
    gamma_neg = _gamma_reflected(-q / 2.0)
    numerator = 2.0 ** (q + d / 2.0) * float(special.gamma((d + q) / 2.0))
    return -((2.0 * math.pi) ** (-d / 2.0)) * numerator / (2.0 * gamma_neg)
