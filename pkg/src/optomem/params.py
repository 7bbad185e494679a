"""Static system parameters and derived quantities.

All frequencies and rates are stored as angular rates (rad/s). Helper
constructors accept ordinary frequencies in Hz and multiply by 2*pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from scipy.constants import c as C_LIGHT
from scipy.constants import hbar as HBAR

TWO_PI = 2.0 * math.pi


def zero_point_amplitude(mass: float, omega: float) -> float:
    """sqrt(hbar / (m * omega)), the RMS length scale of the ground state.

    `mass` in kg, `omega` in rad/s; returns meters.
    """
    if mass <= 0.0:
        raise ValueError(f"mass must be positive, got {mass}")
    if omega <= 0.0:
        raise ValueError(f"omega must be positive, got {omega}")
    return math.sqrt(HBAR / (mass * omega))


@dataclass(frozen=True)
class PhysicalParams:
    """All static constants of the two-membrane cavity.

    Mechanical resonators are labelled 1 and 2; `omega_j` are angular
    frequencies, `gamma_j` energy damping rates.  The cavity decays at
    ``kappa = 2*kappa_in + kappa_ex`` (two identical end mirrors plus
    membrane scattering/absorption losses).

    `Delta` is the drive detuning.  By default (``detuning_is_relative``)
    it is interpreted relative to the membrane-shifted cavity resonance,
    i.e. it equals Delta' of the expanded model at any placement; the
    absolute empty-cavity detuning is then recovered per placement as
    ``Delta' + static_shift``.  Set ``detuning_is_relative=False`` to
    interpret `Delta` as the empty-cavity detuning instead.
    """

    omega1: float
    omega2: float
    gamma1: float
    gamma2: float
    kappa_in: float
    kappa_ex: float
    Delta: float
    n_refr: float
    L: float
    wavelength: float
    Lz: float
    Lx1: float
    Ly1: float
    Lx2: float
    Ly2: float
    rho: float
    branch_l: int = 0
    nbar_a: float = 0.0
    nbar_1: float = 0.0
    nbar_2: float = 0.0
    reflectivity_override: tuple[float, float] | None = None
    detuning_is_relative: bool = True

    def __post_init__(self):
        for name in ("omega1", "omega2", "gamma1", "gamma2", "kappa_in",
                     "kappa_ex", "L", "wavelength", "Lz", "Lx1", "Ly1",
                     "Lx2", "Ly2", "rho"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.n_refr < 1.0:
            raise ValueError("n_refr must be >= 1")
        for name in ("nbar_a", "nbar_1", "nbar_2"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if self.reflectivity_override is not None:
            R, _ = self.reflectivity_override
            if not 0.0 <= R < 1.0:
                raise ValueError("override reflectivity must satisfy 0 <= R < 1")

    # -- derived quantities ------------------------------------------------

    @property
    def kappa(self) -> float:
        return 2.0 * self.kappa_in + self.kappa_ex

    @property
    def omega_bar(self) -> float:
        return 0.5 * (self.omega1 + self.omega2)

    @property
    def delta(self) -> float:
        return self.omega2 - self.omega1

    @property
    def m1(self) -> float:
        # effective mass of the (1,1) drum mode: total membrane mass / 4
        return self.Lx1 * self.Ly1 * self.Lz * self.rho / 4.0

    @property
    def m2(self) -> float:
        return self.Lx2 * self.Ly2 * self.Lz * self.rho / 4.0

    @property
    def chi_zpf1(self) -> float:
        return zero_point_amplitude(self.m1, self.omega1)

    @property
    def chi_zpf2(self) -> float:
        return zero_point_amplitude(self.m2, self.omega2)

    @property
    def k_opt(self) -> float:
        return TWO_PI / self.wavelength

    @property
    def omega_c(self) -> float:
        """Empty-cavity optical frequency (used for drive-power conversion)."""
        return TWO_PI * C_LIGHT / self.wavelength

    @property
    def c_over_L(self) -> float:
        return C_LIGHT / self.L

    def reflectivity(self) -> tuple[float, float]:
        """(R, phi) either from the membrane slab model or the override."""
        if self.reflectivity_override is not None:
            return self.reflectivity_override
        from .model import membrane_reflectivity
        return membrane_reflectivity(self.n_refr, self.Lz, self.wavelength)

    def with_(self, **changes) -> "PhysicalParams":
        return replace(self, **changes)


def table1_params(delta_hz: float = 1e3, **overrides) -> PhysicalParams:
    """Reference parameter set of the membrane-sandwich experiment.

    `delta_hz` is the mechanical frequency difference (omega2 - omega1)/2pi;
    the mean frequency stays at 235.5 kHz.
    """
    omega_bar = TWO_PI * 235.5e3
    delta = TWO_PI * delta_hz
    defaults = dict(
        omega1=omega_bar - delta / 2.0,
        omega2=omega_bar + delta / 2.0,
        gamma1=TWO_PI * 1.0,
        gamma2=TWO_PI * 10.0,
        kappa_in=TWO_PI * 50e3,
        kappa_ex=TWO_PI * 100e3,
        Delta=TWO_PI * 235.5e3,
        n_refr=2.17,
        L=0.09,
        wavelength=1064e-9,
        Lz=104e-9,
        Lx1=1.519e-3,
        Ly1=1.536e-3,
        Lx2=1.522e-3,
        Ly2=1.525e-3,
        rho=3100.0,
    )
    defaults.update(overrides)
    return PhysicalParams(**defaults)
