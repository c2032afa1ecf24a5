"""Reference solutions and benchmark scenarios.

Two independent oracles against which the perturbative generators are
validated:

* :func:`dephasing_exact` -- closed form for a two-level system whose
  coupling commutes with the Hamiltonian: populations frozen, coherence
  ρ01(t) = ρ01(0) e^{-i ω0 t} exp(-2 α^2 Γ1(t)) with
  Γ1(t) = ∫_0^t dt1 ∫_0^{t1} D1(t1 - t2) dt2 evaluated per mode in closed
  form.

* :func:`exact_small_bath` -- brute-force unitary evolution of the system
  plus a Fock-truncated copy of every reservoir mode, partial-traced back to
  the system and rotated to the interaction picture.

Plus a small registry of named benchmark scenarios.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .algebra import SystemModel
from .bath import BathSpec
from .evolve import Trajectory, _monitors, trace_distance

__all__ = [
    "TruncatedBathConfig",
    "dephasing_exact",
    "exact_small_bath",
    "to_interaction_picture",
    "decoherence_exponent",
    "get_preset",
    "list_presets",
    "PRESET_NAMES",
]

_DIM_CAP = 4096
_COMMUTE_TOL = 1e-12


@dataclass(frozen=True)
class TruncatedBathConfig:
    """Fock truncation for the brute-force oracle: N levels per mode."""

    bath: BathSpec
    fock_levels: int

    def __post_init__(self):
        if self.fock_levels < 2:
            raise ValueError(f"need at least 2 Fock levels, got {self.fock_levels}")

    def total_dim(self, system_dim: int) -> int:
        return system_dim * self.fock_levels ** len(self.bath.modes)


# --- Fock-space building blocks ----------------------------------------------


def _ladder(n: int) -> np.ndarray:
    a = np.zeros((n, n), dtype=complex)
    idx = np.arange(n - 1)
    a[idx, idx + 1] = np.sqrt(idx + 1.0)
    return a


def _mode_ops(kappa: float, omega: float, mass: float, n: int):
    """(x, p, H) for one truncated mode (kappa unused for x, p scaling)."""
    a = _ladder(n)
    x = (a + a.conj().T) / math.sqrt(2.0 * mass * omega)
    p = 1j * math.sqrt(mass * omega / 2.0) * (a.conj().T - a)
    h = omega * (np.diag(np.arange(n) + 0.5)).astype(complex)
    return x, p, h


def _thermal_weights(beta: float, omega: float, n: int) -> np.ndarray:
    if math.isinf(beta):
        w = np.zeros(n)
        w[0] = 1.0
        return w
    w = np.exp(-beta * omega * np.arange(n))
    return w / w.sum()


def _kron_all(mats: list[np.ndarray]) -> np.ndarray:
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def _bath_operators(config: TruncatedBathConfig):
    """(B, H_B, rho_B) on the truncated multi-mode bath space."""
    n = config.fock_levels
    modes = config.bath.modes
    nb = n ** len(modes)
    b = np.zeros((nb, nb), dtype=complex)
    h = np.zeros((nb, nb), dtype=complex)
    weights = []
    for i, mode in enumerate(modes):
        x, _, hmode = _mode_ops(*mode, n)
        pre = [np.eye(n, dtype=complex)] * i
        post = [np.eye(n, dtype=complex)] * (len(modes) - i - 1)
        b += mode.kappa * _kron_all(pre + [x] + post)
        h += _kron_all(pre + [hmode] + post)
        weights.append(_thermal_weights(config.bath.beta, mode.omega, n))
    rho_b = _kron_all([np.diag(w).astype(complex) for w in weights])
    return b, h, rho_b


# --- exact solutions ----------------------------------------------------------


def decoherence_exponent(bath: BathSpec, t: float) -> float:
    """Γ1(t) = ∫_0^t ∫_0^{t1} D1(t1 - t2) dt2 dt1, per mode in closed form.

    For a mode (κ, ω, m): (κ^2 / (m ω)) coth(βω/2) (1 - cos ωt) / ω^2.
    """
    amps = bath.amplitudes * bath.coth_factors
    return float(np.sum(amps * (1.0 - np.cos(bath.omegas * t)) / bath.omegas**2))


def dephasing_exact(
    rho0: np.ndarray, model: SystemModel, bath: BathSpec, t: float
) -> np.ndarray:
    """Schrödinger-picture state of the pure-dephasing model at time t.

    Requires a two-level system whose coupling commutes with H_S and has the
    spectrum {+1, -1}.  Populations are unchanged; the coherence in the
    coupling eigenbasis acquires the free phase e^{-i ω0 t} and the decay
    exp(-2 α^2 Γ1(t)).
    """
    if model.dim != 2:
        raise ValueError("dephasing solution requires a two-level system")
    comm = model.h_sys @ model.coupling - model.coupling @ model.h_sys
    if np.max(np.abs(comm)) > _COMMUTE_TOL:
        raise ValueError("coupling must commute with the system Hamiltonian")
    evals, v = np.linalg.eigh(model.coupling)
    order = np.argsort(-evals)  # +1 first
    evals, v = evals[order], v[:, order]
    if np.max(np.abs(evals - np.array([1.0, -1.0]))) > _COMMUTE_TOL:
        raise ValueError("coupling spectrum must be {+1, -1}")
    h_d = v.conj().T @ model.h_sys @ v
    omega0 = float((h_d[0, 0] - h_d[1, 1]).real)
    r = v.conj().T @ np.asarray(rho0, dtype=complex) @ v
    decay = math.exp(-2.0 * model.alpha**2 * decoherence_exponent(bath, t))
    out = np.array(
        [
            [r[0, 0], r[0, 1] * np.exp(-1j * omega0 * t) * decay],
            [r[1, 0] * np.exp(1j * omega0 * t) * decay, r[1, 1]],
        ],
        dtype=complex,
    )
    return v @ out @ v.conj().T


def to_interaction_picture(model: SystemModel, rho: np.ndarray, t: float) -> np.ndarray:
    """e^{+i H_S t} rho e^{-i H_S t}."""
    w, v = model._eig
    phases = np.exp(1j * w * t)
    u = v @ np.diag(phases) @ v.conj().T
    return u @ rho @ u.conj().T


def exact_small_bath(
    rho0: np.ndarray,
    model: SystemModel,
    config: TruncatedBathConfig,
    t_grid: np.ndarray,
    check_truncation: bool = True,
) -> Trajectory:
    """Unitary system+bath evolution, reduced and in the interaction picture.

    H_total = H_S ⊗ 1 + 1 ⊗ H_B - α X ⊗ B on the truncated product space,
    initial state rho0 ⊗ (renormalized truncated Gibbs).  If
    ``check_truncation`` is set, the run is repeated with two extra Fock
    levels and a warning is emitted when any output state moves by more than
    1e-6 in trace distance.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    total = config.total_dim(model.dim)
    if total > _DIM_CAP:
        raise ValueError(
            f"truncated space dimension {total} exceeds the cap {_DIM_CAP}"
        )
    states = _reduced_states(rho0, model, config, t_grid)
    if check_truncation:
        bigger = TruncatedBathConfig(config.bath, config.fock_levels + 2)
        if bigger.total_dim(model.dim) <= _DIM_CAP:
            ref = _reduced_states(rho0, model, bigger, t_grid)
            worst = max(
                trace_distance(a, b) for a, b in zip(states, ref)
            )
            if worst > 1e-6:
                warnings.warn(
                    f"truncation-sensitive result: adding two Fock levels moves "
                    f"states by up to {worst:.3e} in trace distance",
                    stacklevel=2,
                )
    tr, herm, mins = _monitors(states)
    return Trajectory(t_grid.copy(), states, tr, herm, mins)


def _reduced_states(
    rho0: np.ndarray, model: SystemModel, config: TruncatedBathConfig, t_grid
) -> np.ndarray:
    d = model.dim
    b, h_b, rho_b = _bath_operators(config)
    nb = b.shape[0]
    h_tot = (
        np.kron(model.h_sys, np.eye(nb))
        + np.kron(np.eye(d), h_b)
        - model.alpha * np.kron(model.coupling, b)
    )
    evals, u = np.linalg.eigh(h_tot)
    rho_tot0 = np.kron(np.asarray(rho0, dtype=complex), rho_b)
    r0 = u.conj().T @ rho_tot0 @ u
    out = np.empty((len(t_grid), d, d), dtype=complex)
    for k, t in enumerate(t_grid):
        phase = np.exp(-1j * evals * t)
        rho_t = u @ (r0 * np.outer(phase, phase.conj())) @ u.conj().T
        red = rho_t.reshape(d, nb, d, nb)
        rho_s = np.einsum("anbn->ab", red)
        out[k] = to_interaction_picture(model, rho_s, t)
    return out


# --- named scenarios ----------------------------------------------------------

_SZ = np.diag([1.0, -1.0]).astype(complex)
_SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


@dataclass(frozen=True)
class Preset:
    """A ready-to-run scenario: system, reservoir, truncation default."""

    name: str
    model: SystemModel
    bath: BathSpec
    fock_levels: int


def _make_presets() -> dict[str, Preset]:
    presets = {}
    presets["dephasing-single-mode"] = Preset(
        "dephasing-single-mode",
        SystemModel(2, 0.5 * _SZ, _SZ, alpha=0.1),
        BathSpec(modes=[(1.0, 1.0, 1.0)], beta=1.0),
        fock_levels=20,
    )
    presets["spinboson-single-mode"] = Preset(
        "spinboson-single-mode",
        SystemModel(2, 0.5 * _SZ, _SX, alpha=0.1),
        BathSpec(modes=[(1.0, 1.0, 1.0)], beta=1.0),
        fock_levels=12,
    )
    presets["spinboson-two-mode"] = Preset(
        "spinboson-two-mode",
        SystemModel(2, 0.5 * _SZ, _SX, alpha=0.1),
        BathSpec(modes=[(1.0, 1.0, 1.0), (0.6, 1.7, 1.0)], beta=1.0),
        fock_levels=10,
    )
    return presets


_PRESETS = _make_presets()
PRESET_NAMES = tuple(sorted(_PRESETS))


def get_preset(name: str) -> Preset:
    try:
        return _PRESETS[name]
    except KeyError:
        raise ValueError(
            f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}"
        ) from None


def list_presets() -> tuple[str, ...]:
    return PRESET_NAMES
