"""Thermal harmonic reservoir and its two-point kernels.

The reservoir is a finite collection of harmonic modes ``(kappa, omega, mass)``
held in a Gibbs state at inverse temperature ``beta`` (units with
``hbar = k_B = 1``).  The system couples linearly through the collective bath
coordinate, and everything the reduced dynamics needs from the reservoir
enters through two real kernels of the time lag ``tau``:

    D(tau)  = sum_n kappa_n^2 / (m_n omega_n) * sin(omega_n tau)
    D1(tau) = sum_n kappa_n^2 / (m_n omega_n) * coth(beta omega_n / 2)
              * cos(omega_n tau)

``D`` is the dissipation kernel (a commutator of bath coordinates, hence a
c-number independent of temperature and antisymmetric in ``tau``); ``D1`` is
the noise kernel (a thermal anticommutator average, symmetric in ``tau``).
The complex two-point correlation function is

    C(tau) = (D1(tau) - i * D(tau)) / 2.

At ``beta = inf`` every coth factor is 1 (vacuum fluctuations only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "Mode",
    "BathSpec",
    "KernelTable",
    "kernel_D",
    "kernel_D1",
    "bath_correlation",
    "tabulate_kernels",
    "discretize_spectral_density",
]


class Mode(NamedTuple):
    """One harmonic reservoir mode: coupling, frequency, mass."""

    kappa: float
    omega: float
    mass: float


@dataclass(frozen=True)
class BathSpec:
    """Harmonic reservoir model: mode list plus inverse temperature.

    ``beta = math.inf`` selects the zero-temperature (vacuum) state; it is the
    explicit flag for that limit, not a large float stand-in.
    """

    modes: tuple[Mode, ...]
    beta: float

    def __init__(self, modes: Sequence[Sequence[float]], beta: float):
        norm = tuple(Mode(float(k), float(w), float(m)) for (k, w, m) in modes)
        if not norm:
            raise ValueError("bath needs at least one mode")
        for mode in norm:
            if not all(math.isfinite(v) for v in mode):
                raise ValueError(f"mode parameters must be finite, got {mode}")
            if mode.omega <= 0:
                raise ValueError(f"mode frequency must be positive, got {mode.omega}")
            if mode.mass <= 0:
                raise ValueError(f"mode mass must be positive, got {mode.mass}")
        if math.isnan(beta) or beta <= 0:
            raise ValueError(f"beta must be positive (math.inf allowed), got {beta}")
        object.__setattr__(self, "modes", norm)
        object.__setattr__(self, "beta", float(beta))

    @property
    def amplitudes(self) -> np.ndarray:
        """Per-mode weights kappa^2 / (m omega)."""
        return np.array([m.kappa**2 / (m.mass * m.omega) for m in self.modes])

    @property
    def omegas(self) -> np.ndarray:
        return np.array([m.omega for m in self.modes])

    @property
    def coth_factors(self) -> np.ndarray:
        """coth(beta omega / 2) per mode; exactly 1 at beta = inf."""
        if math.isinf(self.beta):
            return np.ones(len(self.modes))
        return 1.0 / np.tanh(self.beta * self.omegas / 2.0)


def _eval_mode_sum(bath: BathSpec, tau, weights: np.ndarray, osc: Callable):
    """sum_n weights_n * osc(omega_n * tau), vectorized over tau."""
    t = np.asarray(tau, dtype=float)
    phases = np.multiply.outer(t, bath.omegas)
    out = osc(phases) @ weights
    if np.ndim(tau) == 0:
        return float(out)
    return out


def kernel_D(bath: BathSpec, tau):
    """Dissipation kernel D(tau); antisymmetric, temperature independent.

    Accepts a scalar or an ndarray of lags.
    """
    return _eval_mode_sum(bath, tau, bath.amplitudes, np.sin)


def kernel_D1(bath: BathSpec, tau):
    """Noise kernel D1(tau); symmetric, carries the coth thermal factor."""
    return _eval_mode_sum(bath, tau, bath.amplitudes * bath.coth_factors, np.cos)


def bath_correlation(bath: BathSpec, tau):
    """Complex two-point correlation C(tau) = (D1(tau) - i D(tau)) / 2."""
    d1 = kernel_D1(bath, tau)
    d = kernel_D(bath, tau)
    if np.ndim(tau) == 0:
        return complex(0.5 * (d1 - 1j * d))
    return 0.5 * (d1 - 1j * d)


@dataclass(frozen=True)
class KernelTable:
    """Kernels sampled on a uniform lag grid (for CSV output and caching)."""

    tau_grid: np.ndarray
    D_values: np.ndarray
    D1_values: np.ndarray


def tabulate_kernels(bath: BathSpec, t_max: float, n_points: int) -> KernelTable:
    """Sample D and D1 on ``n_points`` uniform lags covering [0, t_max]."""
    if t_max <= 0:
        raise ValueError(f"t_max must be positive, got {t_max}")
    if n_points < 2:
        raise ValueError(f"need at least 2 grid points, got {n_points}")
    taus = np.linspace(0.0, t_max, n_points)
    return KernelTable(taus, kernel_D(bath, taus), kernel_D1(bath, taus))


def discretize_spectral_density(
    j: Callable[[float], float], omega_max: float, n_modes: int
) -> tuple[Mode, ...]:
    """Midpoint-sample a spectral density J(omega) into discrete modes.

    Convention: J(omega) = (pi/2) sum_n kappa_n^2/(m_n omega_n)
    delta(omega - omega_n), so the continuum dissipation kernel is
    D(tau) = (2/pi) int_0^inf J(omega) sin(omega tau) d omega.  Each of the
    ``n_modes`` midpoints omega_k of the uniform partition of [0, omega_max]
    becomes a unit-mass mode with kappa_k = sqrt(2 J(omega_k) omega_k
    Delta / pi).
    """
    if omega_max <= 0:
        raise ValueError(f"omega_max must be positive, got {omega_max}")
    if n_modes < 1:
        raise ValueError(f"need at least one mode, got {n_modes}")
    delta = omega_max / n_modes
    modes = []
    for k in range(n_modes):
        w = (k + 0.5) * delta
        jw = float(j(w))
        if jw < 0:
            raise ValueError(f"spectral density must be nonnegative, J({w}) = {jw}")
        modes.append(Mode(math.sqrt(2.0 * jw * w * delta / math.pi), w, 1.0))
    return tuple(modes)
