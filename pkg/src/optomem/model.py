"""Exact dispersive-coupling kernel for two membranes in a cavity.

The membranes at absolute positions ``q~_j = Q_j + q_j * chi_zpf_j`` shift
the cavity resonance by an interference-induced amount ``delta_omega``.
This module evaluates that shift, its analytic first derivatives with
respect to the dimensionless displacements, and the second-order expansion
coefficients obtained by complex-step differentiation of the analytic
gradient.

All functions are pure and accept scalars or numpy arrays for the
position arguments (broadcasting applies).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import PhysicalParams

F_CLAMP_TOL = 1e-12
MIXED_SYMMETRY_TOL = 1e-6


class DomainError(ValueError):
    """Evaluation outside the model's validity domain (|F|>1, singular branch)."""


def membrane_reflectivity(n_refr: float, Lz: float, wavelength: float) -> tuple[float, float]:
    """Intensity reflectivity R and phase phi of one dielectric slab.

    Thin-slab complex reflectivity
    ``r = (n^2-1) sin(k n Lz) / [(n^2+1) sin(k n Lz) + 2 i n cos(k n Lz)]``.
    Returns (|r|^2, arg r); for n = 1 or sin(k n Lz) = 0 the membrane is
    transparent and (0.0, 0.0) is returned.
    """
    if n_refr < 1.0:
        raise ValueError("refractive index must be >= 1")
    if Lz <= 0.0 or wavelength <= 0.0:
        raise ValueError("thickness and wavelength must be positive")
    knl = 2.0 * math.pi / wavelength * n_refr * Lz
    num = (n_refr**2 - 1.0) * math.sin(knl)
    if num == 0.0:
        return 0.0, 0.0
    den = (n_refr**2 + 1.0) * math.sin(knl) + 2.0j * n_refr * math.cos(knl)
    r = num / den
    return abs(r) ** 2, math.atan2(r.imag, r.real)


@dataclass(frozen=True)
class InterferenceKernel:
    """Intermediate quantities of the interference closed forms at one point."""

    F: np.ndarray
    theta: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    f4: np.ndarray
    f5: np.ndarray
    f6: np.ndarray
    f7: np.ndarray
    f8: np.ndarray
    qt1: np.ndarray
    qt2: np.ndarray


def _raw_terms(R: float, phi: float, k: float, qt1, qt2):
    """F and the f1..f8 combinations, valid for real or complex positions.

    The complex path (used for complex-step derivatives) writes f6 without
    the absolute value, which is legal because 1 - R cos(psi) > 0 for R < 1.
    """
    sum_ang = k * (qt1 + qt2)
    dif_ang = k * (qt2 - qt1) + phi
    psi = 2.0 * k * (qt2 - qt1) + 2.0 * phi

    sqR = math.sqrt(R)
    den2 = 1.0 + R * R - 2.0 * R * np.cos(psi)   # |1 - R e^{i psi}|^2
    den = np.sqrt(den2)

    F = -2.0 * sqR * np.cos(sum_ang) * np.sin(dif_ang) / den

    f1 = (2.0 - R + 2.0 * R * R) * np.cos(2.0 * k * qt1 - phi)
    f2 = R * (np.cos(2.0 * k * (qt1 - 2.0 * qt2) - 3.0 * phi)
              - 3.0 * np.cos(2.0 * k * qt2 + phi)
              - np.cos(2.0 * k * (qt2 - 2.0 * qt1) + 3.0 * phi))
    f3 = den2 ** 1.5
    f4 = np.sqrt(1.0 - F * F) if np.iscomplexobj(F) else \
        np.sqrt(np.maximum(1.0 - np.real(F * F), 0.0))
    f5 = (-2.0 * (1.0 + R * R) * np.cos(psi) + R * (3.0 + np.cos(2.0 * psi)))
    f6 = (1.0 - R * np.cos(psi)) / den
    f7 = (-2.0 + R - 2.0 * R * R) * np.cos(2.0 * k * qt2 + phi)
    f8 = R * (np.cos(2.0 * k * (qt1 - 2.0 * qt2) - 3.0 * phi)
              + 3.0 * np.cos(2.0 * k * qt1 - phi)
              - np.cos(2.0 * k * (qt2 - 2.0 * qt1) + 3.0 * phi))
    return F, psi, den, f1, f2, f3, f4, f5, f6, f7, f8


def _membrane_positions(params: PhysicalParams, Q1, Q2, q1, q2):
    qt1 = np.asarray(Q1) + np.asarray(q1) * params.chi_zpf1
    qt2 = np.asarray(Q2) + np.asarray(q2) * params.chi_zpf2
    return qt1, qt2


def interference_kernel(params: PhysicalParams, Q1, Q2, q1=0.0, q2=0.0) -> InterferenceKernel:
    """Evaluate F, theta and the f1..f8 gradient intermediates.

    Raises DomainError if |F| exceeds 1 by more than the floating-point
    clamp tolerance, or if a denominator degenerates (R -> 1).
    """
    R, phi = params.reflectivity()
    if R >= 1.0:
        raise DomainError("membrane reflectivity must satisfy R < 1")
    qt1, qt2 = _membrane_positions(params, Q1, Q2, q1, q2)
    F, psi, den, f1, f2, f3, f4, f5, f6, f7, f8 = _raw_terms(
        R, phi, params.k_opt, qt1, qt2)

    excess = np.abs(F) - 1.0
    if np.any(excess > F_CLAMP_TOL):
        raise DomainError(f"|F| exceeds 1 by {float(np.max(excess)):.3e}")
    F = np.clip(F, -1.0, 1.0)
    theta = np.arcsin(R * np.sin(psi) / den)
    return InterferenceKernel(F, theta, f1, f2, f3, f4, f5, f6, f7, f8, qt1, qt2)


def cavity_shift(params: PhysicalParams, Q1, Q2, q1=0.0, q2=0.0):
    """Interference-induced cavity frequency shift delta_omega (rad/s).

    ``(c/L) [(-1)^l arcsin F - theta - 2 phi]`` with the principal arcsin
    branch; continuous wherever |F| < 1.
    """
    _, phi = params.reflectivity()
    ker = interference_kernel(params, Q1, Q2, q1, q2)
    sign = -1.0 if params.branch_l % 2 else 1.0
    out = params.c_over_L * (sign * np.arcsin(ker.F) - ker.theta - 2.0 * phi)
    return out if out.ndim else float(out)


def _gradient_raw(params: PhysicalParams, Q1, Q2, q1, q2, check: bool = True):
    """(L1, L2) for real or complex dimensionless displacements."""
    R, phi = params.reflectivity()
    if R >= 1.0:
        raise DomainError("membrane reflectivity must satisfy R < 1")
    qt1, qt2 = _membrane_positions(params, Q1, Q2, q1, q2)
    F, _, _, f1, f2, f3, f4, f5, f6, f7, f8 = _raw_terms(
        R, phi, params.k_opt, qt1, qt2)
    if check and (np.any(np.real(f4) <= 0.0) or np.any(np.real(f6) <= 0.0)):
        raise DomainError("arcsin-branch singularity: f4 or f6 vanished (|F|=1)")
    k = params.k_opt
    sqR = math.sqrt(R)
    sign = 1.0 if params.branch_l % 2 else -1.0      # (-1)^(l+1)
    arcsin_term1 = sign * k * sqR * (f1 + f2) / (f3 * f4)
    arcsin_term2 = sign * k * sqR * (f7 + f8) / (f3 * f4)
    theta_term = k * R * f5 / (f3 * f6)
    L1 = params.c_over_L * params.chi_zpf1 * (arcsin_term1 + theta_term)
    L2 = params.c_over_L * params.chi_zpf2 * (arcsin_term2 - theta_term)
    return L1, L2


def coupling_gradient(params: PhysicalParams, Q1, Q2, q1=0.0, q2=0.0):
    """Analytic radiation-pressure coefficients (L1, L2) in rad/s.

    ``L_j = -d[delta_omega]/dq_j`` per unit dimensionless displacement,
    assembled from the closed-form intermediates f1..f8.
    """
    L1, L2 = _gradient_raw(params, Q1, Q2,
                           np.asarray(q1, dtype=float),
                           np.asarray(q2, dtype=float))
    if np.ndim(L1):
        return L1, L2
    return float(L1), float(L2)


@dataclass(frozen=True)
class CouplingSet:
    """Expansion coefficients of delta_omega at a membrane placement.

    ``g1, g2`` are the linear (single-photon) couplings, i.e. the gradient
    L_j evaluated at q = 0.  ``g12, g22, gt`` are the *second partials of
    delta_omega* at the origin (sign convention: the quadratic force
    correction enters the dynamics through the expansion of
    ``-d[delta_omega]/dq_j``, i.e. as ``g_j - g12*q_j - gt*q_(3-j)``).
    `Delta_prime` is the drive detuning relative to the statically shifted
    resonance.  All entries in rad/s.
    """

    delta_omega0: float
    g1: float
    g2: float
    g12: float
    g22: float
    gt: float
    Delta_prime: float
    #: placement the expansion was taken at (needed by the full-model tier)
    Q1: float = 0.0
    Q2: float = 0.0


def coupling_fields(params: PhysicalParams, Q1, Q2, h_q: float = 1e-3):
    """Vectorized second-order expansion over arrays of placements.

    Returns arrays (delta_omega0, g1, g2, g12, g22, gt) broadcast over
    Q1, Q2.  Linear couplings come from the analytic gradient; quadratic
    ones from a complex-step derivative of the gradient with step `h_q`
    (no subtractive cancellation, so the result is accurate to machine
    precision; the step only controls a negligible truncation term).
    """
    Q1 = np.asarray(Q1, dtype=float)
    Q2 = np.asarray(Q2, dtype=float)
    dw0 = np.asarray(cavity_shift(params, Q1, Q2, 0.0, 0.0))
    g1, g2 = _gradient_raw(params, Q1, Q2, 0.0, 0.0)
    g1 = np.asarray(g1)
    g2 = np.asarray(g2)

    step = 1j * h_q
    L1_q1, L2_q1 = _gradient_raw(params, Q1, Q2, step, 0.0, check=False)
    L1_q2, L2_q2 = _gradient_raw(params, Q1, Q2, 0.0, step, check=False)

    # d2[dw]/dq_j^2 = -dL_j/dq_j ; mixed partial from either gradient
    g12 = -np.imag(L1_q1) / h_q
    g22 = -np.imag(L2_q2) / h_q
    gt_a = -np.imag(L1_q2) / h_q
    gt_b = -np.imag(L2_q1) / h_q
    scale = np.maximum(np.abs(gt_a), np.abs(gt_b))
    bad = np.abs(gt_a - gt_b) > MIXED_SYMMETRY_TOL * np.maximum(scale, 1e-300)
    if np.any(bad & (scale > 0.0)):
        raise DomainError("mixed partials d2/dq1dq2 and d2/dq2dq1 disagree")
    gt = 0.5 * (gt_a + gt_b)
    return dw0, g1, g2, g12, g22, gt


def coupling_coefficients(params: PhysicalParams, Q1: float, Q2: float,
                          h_q: float = 1e-3) -> CouplingSet:
    """Second-order expansion of delta_omega around one placement (Q1, Q2)."""
    dw0, g1, g2, g12, g22, gt = (
        np.asarray(v).item() for v in coupling_fields(params, Q1, Q2, h_q))
    if params.detuning_is_relative:
        Delta_prime = params.Delta
    else:
        Delta_prime = params.Delta - dw0
    return CouplingSet(delta_omega0=dw0, g1=g1, g2=g2, g12=g12, g22=g22,
                       gt=gt, Delta_prime=Delta_prime, Q1=Q1, Q2=Q2)
