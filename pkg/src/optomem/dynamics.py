"""Time-domain dynamics of the driven two-membrane cavity.

Three model tiers share one state layout:

* ``FIRST_ORDER``  - linear dispersive coupling g_j q_j,
* ``SECOND_ORDER`` - adds the quadratic and cross corrections g12, g22, gt,
* ``FULL``         - evaluates the exact interference shift and force at
  every step.

The equations are written in the frame rotating at the drive frequency.
``q_j, p_j`` are dimensionless mechanical quadratures, ``a`` the c-number
cavity amplitude.  The radiation-pressure force carries the symmetrized
photon number ``|a|^2 - 1/2`` so that ensemble averages of the c-number
model reproduce symmetrically ordered quantum moments.

Deterministic runs use classic RK4, stochastic runs the Heun scheme
(exact strong order 1.0 for this purely additive noise).  Both run on a
fixed dimensionless step ``d(tau) = omega_bar * dt`` (default 0.005).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import hbar as HBAR

from . import _kernels
from .model import CouplingSet, cavity_shift, coupling_gradient
from .params import PhysicalParams

DEFAULT_DTAU = 0.005
#: steps between compiled-kernel calls when no finer sampling is requested
_MAX_CHUNK = 8192


class ModelTier(enum.IntEnum):
    FIRST_ORDER = _kernels.TIER_FIRST
    SECOND_ORDER = _kernels.TIER_SECOND
    FULL = _kernels.TIER_FULL


class NonFiniteError(RuntimeError):
    """Integration produced NaN/inf; carries the last good time."""

    def __init__(self, t: float, lane: int = 0):
        super().__init__(f"state became non-finite near t = {t:.6e} s "
                         f"(lane {lane})")
        self.t = t
        self.lane = lane


@dataclass
class SystemState:
    """Instantaneous phase-space point (dimensionless mechanics, c-number a)."""

    q1: float = 0.0
    p1: float = 0.0
    q2: float = 0.0
    p2: float = 0.0
    a: complex = 0.0 + 0.0j
    t: float = 0.0

    def as_vector(self) -> np.ndarray:
        return np.array([self.q1, self.p1, self.q2, self.p2,
                         self.a.real, self.a.imag])

    @classmethod
    def from_vector(cls, y, t: float = 0.0) -> "SystemState":
        return cls(q1=float(y[0]), p1=float(y[1]), q2=float(y[2]),
                   p2=float(y[3]), a=complex(y[4], y[5]), t=t)


@dataclass(frozen=True)
class DriveSpec:
    """Coherent drive in the rotating frame.

    `E` is a constant (single-tone) amplitude in rad/s.  A two-tone drive
    adds ``E1 exp(-i omega_tone1 t) + E2 exp(+i omega_tone2 t)`` with the
    tone offsets in rad/s relative to the frame frequency.
    """

    E: complex = 0.0 + 0.0j
    E1: float = 0.0
    E2: float = 0.0
    omega_tone1: float = 0.0
    omega_tone2: float = 0.0

    def __post_init__(self):
        if (self.E1 != 0.0 and self.omega_tone1 == 0.0) or \
           (self.E2 != 0.0 and self.omega_tone2 == 0.0):
            raise ValueError("two-tone amplitudes need nonzero tone offsets")

    @property
    def two_tone(self) -> bool:
        return self.E1 != 0.0 or self.E2 != 0.0

    def amplitude_at(self, t: float) -> complex:
        out = complex(self.E)
        if self.two_tone:
            out += self.E1 * np.exp(-1j * self.omega_tone1 * t)
            out += self.E2 * np.exp(+1j * self.omega_tone2 * t)
        return out

    @staticmethod
    def from_power(P_in: float, params: PhysicalParams) -> "DriveSpec":
        """Single-tone amplitude ``sqrt(2 P_in kappa_in / (hbar omega_c))``."""
        if P_in < 0.0:
            raise ValueError("drive power must be non-negative")
        return DriveSpec(E=math.sqrt(2.0 * P_in * params.kappa_in
                                     / (HBAR * params.omega_c)))

    def power(self, params: PhysicalParams) -> float:
        """Input power of the single-tone component (inverse of from_power)."""
        return abs(self.E) ** 2 * HBAR * params.omega_c / (2.0 * params.kappa_in)


@dataclass(frozen=True)
class NoiseSpec:
    """Input-noise configuration for stochastic runs.

    The c-number correlators are ``<a_in* a_in> = (nbar_a + 1/2) delta`` and
    ``<xi_j xi_j> = 2 gamma_j (nbar_j + 1/2) delta``; vacuum corresponds to
    all occupations zero with `enabled` True.
    """

    enabled: bool = True
    nbar_a: float = 0.0
    nbar_1: float = 0.0
    nbar_2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for v in (self.nbar_a, self.nbar_1, self.nbar_2):
            if v < 0.0:
                raise ValueError("thermal occupations must be non-negative")

    @staticmethod
    def from_params(params: PhysicalParams, seed: int = 0) -> "NoiseSpec":
        return NoiseSpec(enabled=True, nbar_a=params.nbar_a,
                         nbar_1=params.nbar_1, nbar_2=params.nbar_2,
                         seed=seed)


# --- reference drift functions (natural units, rad/s) -------------------------

def _drive_term(drive: DriveSpec | None, t: float) -> complex:
    return drive.amplitude_at(t) if drive is not None else 0.0j


def drift_first_order(state: SystemState, params: PhysicalParams,
                      coupling: CouplingSet,
                      drive: DriveSpec | None = None) -> SystemState:
    """Linearly coupled drift; returned SystemState holds d/dt values."""
    aa = abs(state.a) ** 2 - 0.5
    det = coupling.Delta_prime + coupling.g1 * state.q1 + coupling.g2 * state.q2
    da = (-params.kappa + 1j * det) * state.a + _drive_term(drive, state.t)
    return SystemState(
        q1=params.omega1 * state.p1,
        p1=-params.omega1 * state.q1 - params.gamma1 * state.p1
           + coupling.g1 * aa,
        q2=params.omega2 * state.p2,
        p2=-params.omega2 * state.q2 - params.gamma2 * state.p2
           + coupling.g2 * aa,
        a=da, t=1.0)


def drift_second_order(state: SystemState, params: PhysicalParams,
                       coupling: CouplingSet,
                       drive: DriveSpec | None = None) -> SystemState:
    """Drift including quadratic (g12, g22) and cross (gt) corrections."""
    aa = abs(state.a) ** 2 - 0.5
    q1, q2 = state.q1, state.q2
    f1 = coupling.g1 - coupling.g12 * q1 - coupling.gt * q2
    f2 = coupling.g2 - coupling.g22 * q2 - coupling.gt * q1
    det = (coupling.Delta_prime
           + (coupling.g1 - 0.5 * coupling.g12 * q1
              - 0.5 * coupling.gt * q2) * q1
           + (coupling.g2 - 0.5 * coupling.g22 * q2
              - 0.5 * coupling.gt * q1) * q2)
    da = (-params.kappa + 1j * det) * state.a + _drive_term(drive, state.t)
    return SystemState(
        q1=params.omega1 * state.p1,
        p1=-params.omega1 * q1 - params.gamma1 * state.p1 + f1 * aa,
        q2=params.omega2 * state.p2,
        p2=-params.omega2 * q2 - params.gamma2 * state.p2 + f2 * aa,
        a=da, t=1.0)


def drift_full(state: SystemState, params: PhysicalParams,
               coupling: CouplingSet,
               drive: DriveSpec | None = None) -> SystemState:
    """All-orders drift: exact shift and gradient at the displaced positions.

    The cavity detuning is measured from the statically shifted resonance,
    ``Delta' - [delta_omega(q) - delta_omega(0)]``, so at q = 0 all three
    tiers coincide.
    """
    aa = abs(state.a) ** 2 - 0.5
    L1, L2 = coupling_gradient(params, coupling.Q1, coupling.Q2,
                               state.q1, state.q2)
    dw = cavity_shift(params, coupling.Q1, coupling.Q2, state.q1, state.q2)
    det = coupling.Delta_prime - (dw - coupling.delta_omega0)
    da = (-params.kappa + 1j * det) * state.a + _drive_term(drive, state.t)
    return SystemState(
        q1=params.omega1 * state.p1,
        p1=-params.omega1 * state.q1 - params.gamma1 * state.p1 + L1 * aa,
        q2=params.omega2 * state.p2,
        p2=-params.omega2 * state.q2 - params.gamma2 * state.p2 + L2 * aa,
        a=da, t=1.0)


_DRIFTS = {ModelTier.FIRST_ORDER: drift_first_order,
           ModelTier.SECOND_ORDER: drift_second_order,
           ModelTier.FULL: drift_full}


def drift(state: SystemState, tier: ModelTier, params: PhysicalParams,
          coupling: CouplingSet, drive: DriveSpec | None = None) -> SystemState:
    return _DRIFTS[ModelTier(tier)](state, params, coupling, drive)


def noise_increments(noise: NoiseSpec, params: PhysicalParams, dt: float,
                     rng: np.random.Generator):
    """One step of input-noise increments (da_in, dW1, dW2).

    `da_in` is the full complex increment entering ``a`` (the sqrt(2 kappa)
    prefactor is included), so each quadrature has variance
    ``kappa (nbar_a + 1/2) dt``; `dW_j` has variance
    ``2 gamma_j (nbar_j + 1/2) dt``.  Draw order is fixed
    (Re a, Im a, W1, W2) so streams are reproducible.
    """
    z = rng.standard_normal(4)
    sa = math.sqrt(params.kappa * (noise.nbar_a + 0.5) * dt)
    s1 = math.sqrt(2.0 * params.gamma1 * (noise.nbar_1 + 0.5) * dt)
    s2 = math.sqrt(2.0 * params.gamma2 * (noise.nbar_2 + 0.5) * dt)
    return sa * (z[0] + 1j * z[1]), s1 * z[2], s2 * z[3]


# --- trajectory integration ----------------------------------------------------

@dataclass
class Trajectory:
    """Sampled solution; `t` in seconds, mechanics dimensionless."""

    t: np.ndarray
    q1: np.ndarray
    p1: np.ndarray
    q2: np.ndarray
    p2: np.ndarray
    a: np.ndarray
    tier: ModelTier
    dt: float

    @property
    def b1(self) -> np.ndarray:
        return self.q1 + 1j * self.p1

    @property
    def b2(self) -> np.ndarray:
        return self.q2 + 1j * self.p2

    def final_state(self) -> SystemState:
        return SystemState(q1=float(self.q1[-1]), p1=float(self.p1[-1]),
                           q2=float(self.q2[-1]), p2=float(self.p2[-1]),
                           a=complex(self.a[-1]), t=float(self.t[-1]))


def integrate(state0: SystemState, tier: ModelTier, params: PhysicalParams,
              coupling: CouplingSet, drive: DriveSpec | None = None,
              noise: NoiseSpec | None = None, dt: float | None = None,
              t_end: float = 0.0, sample_stride: int = 1) -> Trajectory:
    """Propagate one trajectory on a fixed grid and sample every
    `sample_stride` steps (the initial point is always included).

    `dt` defaults to ``0.005 / omega_bar``.  With `noise` enabled (and a
    given seed) results are bit-reproducible.  Raises NonFiniteError as
    soon as a sampled state stops being finite.
    """
    if t_end <= 0.0:
        raise ValueError("t_end must be positive")
    if sample_stride < 1:
        raise ValueError("sample_stride must be >= 1")
    wb = params.omega_bar
    if dt is None:
        dt = DEFAULT_DTAU / wb
    dtau = dt * wb
    n_steps = max(1, round(t_end / dt))

    stochastic = noise is not None and noise.enabled
    rng = np.random.default_rng(np.random.SeedSequence(noise.seed)) \
        if stochastic else None
    C = _kernels.pack_constants(params, coupling, drive, noise)[None, :]
    y = state0.as_vector()[None, :].copy()
    tau = state0.t * wb

    sample_steps = list(range(0, n_steps + 1, sample_stride))
    if sample_steps[-1] != n_steps:         # always include the endpoint
        sample_steps.append(n_steps)
    times = state0.t + dt * np.asarray(sample_steps, dtype=float)
    out = np.empty((len(sample_steps), 6))
    out[0] = y[0]

    zero_z = np.zeros((0, 1, 4))
    done = 0
    for idx, target in enumerate(sample_steps[1:], start=1):
        while done < target:
            todo = min(_MAX_CHUNK, target - done)
            z = rng.standard_normal((todo, 1, 4)) if stochastic else zero_z
            tau = _kernels.run_chunk(int(tier), y, tau, dtau, todo, C, z,
                                     stochastic)
            done += todo
            if not np.all(np.isfinite(y)):
                raise NonFiniteError(state0.t + done * dt)
        out[idx] = y[0]
    return Trajectory(t=times, q1=out[:, 0], p1=out[:, 1], q2=out[:, 2],
                      p2=out[:, 3], a=out[:, 4] + 1j * out[:, 5],
                      tier=ModelTier(tier), dt=dt)
