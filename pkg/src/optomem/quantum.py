"""Gaussian-state analysis and the linearized mean-field oracle.

Covariances live in the quadrature basis u = (x, y, q1, p1, q2, p2) with
x = (a* + a)/sqrt(2), y = i(a* - a)/sqrt(2); the vacuum variance of every
quadrature is 1/2.  Mechanical entanglement is quantified by the
logarithmic negativity of the reduced two-mode covariance and by the
Duan separability sum.

The mean-field propagator linearizes the first-order dynamics around the
evolving expectation values: means follow the nonlinear classical
equations, fluctuations obey d(delta u)/dt = S(t) delta u + noise, and
the covariance solves the Lyapunov equation dC/dt = S C + C S^T + N with
N = diag[kappa(2 nbar_a + 1), kappa(2 nbar_a + 1), 0, gamma1(2 nbar_1 + 1),
0, gamma2(2 nbar_2 + 1)].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _kernels
from .dynamics import DriveSpec, ModelTier, NoiseSpec, NonFiniteError
from .model import CouplingSet
from .params import PhysicalParams

SQRT2 = math.sqrt(2.0)


class NonPhysicalCovariance(ValueError):
    """Covariance violates positivity beyond numerical tolerance."""


@dataclass
class CovarianceState:
    """First and second moments of the three-mode Gaussian state."""

    mean: np.ndarray          # (6,)
    cov: np.ndarray           # (6, 6), symmetric
    t: float = 0.0
    n_samples: int = 0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        if self.mean.shape != (6,) or self.cov.shape != (6, 6):
            raise ValueError("mean must be length 6, cov 6x6")
        if not np.allclose(self.cov, self.cov.T, atol=1e-12):
            raise ValueError("covariance must be symmetric within 1e-12")

    @property
    def mechanical(self) -> np.ndarray:
        """Reduced 4x4 covariance of (q1, p1, q2, p2)."""
        return self.cov[2:, 2:]


def quadrature_samples(q1, p1, q2, p2, a) -> np.ndarray:
    """Stack per-trajectory c-number values into (N, 6) quadrature samples."""
    a = np.asarray(a)
    return np.column_stack([SQRT2 * a.real, SQRT2 * a.imag,
                            q1, p1, q2, p2])


def ensemble_moments(samples: np.ndarray, t: float = 0.0) -> CovarianceState:
    """Unbiased mean/covariance estimate from (N, 6) quadrature samples."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 6:
        raise ValueError("samples must have shape (N, 6)")
    n = samples.shape[0]
    if n < 2:
        raise ValueError("need at least 2 samples")
    mean = samples.mean(axis=0)
    d = samples - mean
    cov = d.T @ d / (n - 1)
    cov = 0.5 * (cov + cov.T)
    return CovarianceState(mean=mean, cov=cov, t=t, n_samples=n)


def _mechanical_block(C) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    if C.shape == (6, 6):
        C = C[2:, 2:]
    if C.shape != (4, 4):
        raise ValueError("covariance must be 4x4 or 6x6")
    return C


_OMEGA = np.array([[0.0, 1.0, 0.0, 0.0],
                   [-1.0, 0.0, 0.0, 0.0],
                   [0.0, 0.0, 0.0, 1.0],
                   [0.0, 0.0, -1.0, 0.0]])


def logarithmic_negativity(C, tol: float = 1e-10) -> float:
    """E_n of the mechanical bipartition from a covariance matrix.

    Partial transposition flips the sign of the p2 correlations; zeta is
    the smallest symplectic eigenvalue of the transposed matrix and
    E_n = max(0, -ln 2 zeta).
    """
    V = _mechanical_block(C).copy()
    V[3, :] *= -1.0
    V[:, 3] *= -1.0
    M = -(_OMEGA @ V) @ (_OMEGA @ V)
    eig = np.linalg.eigvals(M)
    if np.max(np.abs(eig.imag)) > 1e-8 * max(1.0, np.max(np.abs(eig.real))):
        raise NonPhysicalCovariance("complex squared symplectic spectrum")
    eig = eig.real
    low = eig.min()
    if low < -tol:
        raise NonPhysicalCovariance(f"negative squared eigenvalue {low:.3e}")
    zeta = math.sqrt(max(low, 0.0))
    if zeta <= 0.0:
        raise NonPhysicalCovariance("vanishing symplectic eigenvalue")
    return max(0.0, -math.log(2.0 * zeta))


def duan_sum(C, alpha: float = 1.0) -> float:
    """EPR variance sum <[D(|a|q1 + q2/a)]^2> + <[D(|a|p1 - p2/a)]^2>.

    Separable states satisfy >= 2 in these conventions; values below 2
    certify entanglement.
    """
    if alpha == 0.0:
        raise ValueError("alpha must be nonzero")
    V = _mechanical_block(C)
    u = np.array([abs(alpha), 0.0, 1.0 / alpha, 0.0])
    v = np.array([0.0, abs(alpha), 0.0, -1.0 / alpha])
    return float(u @ V @ u + v @ V @ v)


def phase_space_histogram(samples, basis_transform=None, h: float = 0.05,
                          extent: float | None = None):
    """2D probability density of linear mechanical coordinates.

    `samples` has shape (N, 4) in (q1, p1, q2, p2); `basis_transform` is a
    (2, 4) matrix mapping them to plotting coordinates (default: q1, p1).
    Returns (W, centers_x, centers_y) with W = counts / (N h^2), so
    sum(W) * h^2 equals the fraction of samples inside the grid.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 4:
        raise ValueError("samples must have shape (N, 4)")
    if h <= 0.0:
        raise ValueError("bin width h must be positive")
    if basis_transform is None:
        basis_transform = np.array([[1.0, 0.0, 0.0, 0.0],
                                    [0.0, 1.0, 0.0, 0.0]])
    T = np.asarray(basis_transform, dtype=float)
    if T.shape != (2, 4):
        raise ValueError("basis_transform must be 2x4")
    xy = samples @ T.T
    if extent is None:
        extent = float(np.max(np.abs(xy))) + h
    nbin = max(1, int(math.ceil(2.0 * extent / h)))
    edges = -extent + h * np.arange(nbin + 1)
    counts, ex, ey = np.histogram2d(xy[:, 0], xy[:, 1], bins=(edges, edges))
    W = counts / (samples.shape[0] * h * h)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return W, centers, centers


# --- mean-field linearized propagator ------------------------------------------

@njit(cache=True)
def _mf_derivative(c, m, C, tau, N, dm, dC, S):
    """Joint derivative of means m = (ar, ai, q1, p1, q2, p2) and cov C."""
    ar, ai, q1, p1, q2, p2 = m[0], m[1], m[2], m[3], m[4], m[5]
    er = c[_kernels.I_ER]
    ei = c[_kernels.I_EI]
    if c[_kernels.I_E1] != 0.0 or c[_kernels.I_E2] != 0.0:
        w1t = c[_kernels.I_W1] * tau
        w2t = c[_kernels.I_W2] * tau
        er += c[_kernels.I_E1] * math.cos(w1t) + c[_kernels.I_E2] * math.cos(w2t)
        ei += -c[_kernels.I_E1] * math.sin(w1t) + c[_kernels.I_E2] * math.sin(w2t)
    kap = c[_kernels.I_KAP]
    g1 = c[_kernels.I_G1]
    g2 = c[_kernels.I_G2]
    om1 = c[_kernels.I_OM1]
    om2 = c[_kernels.I_OM2]
    ga1 = c[_kernels.I_GA1]
    ga2 = c[_kernels.I_GA2]
    det = c[_kernels.I_DP] + g1 * q1 + g2 * q2
    aa = ar * ar + ai * ai

    dm[0] = -kap * ar - det * ai + er
    dm[1] = -kap * ai + det * ar + ei
    dm[2] = om1 * p1
    dm[3] = -om1 * q1 - ga1 * p1 + g1 * aa
    dm[4] = om2 * p2
    dm[5] = -om2 * q2 - ga2 * p2 + g2 * aa

    for i in range(6):
        for j in range(6):
            S[i, j] = 0.0
    S[0, 0] = -kap
    S[0, 1] = -det
    S[1, 0] = det
    S[1, 1] = -kap
    S[0, 2] = -SQRT2 * g1 * ai
    S[1, 2] = SQRT2 * g1 * ar
    S[0, 4] = -SQRT2 * g2 * ai
    S[1, 4] = SQRT2 * g2 * ar
    S[2, 3] = om1
    S[3, 2] = -om1
    S[3, 3] = -ga1
    S[3, 0] = SQRT2 * g1 * ar
    S[3, 1] = SQRT2 * g1 * ai
    S[4, 5] = om2
    S[5, 4] = -om2
    S[5, 5] = -ga2
    S[5, 0] = SQRT2 * g2 * ar
    S[5, 1] = SQRT2 * g2 * ai

    for i in range(6):
        for j in range(6):
            acc = N[i, j]
            for k in range(6):
                acc += S[i, k] * C[k, j] + C[i, k] * S[j, k]
            dC[i, j] = acc


@njit(cache=True)
def _mf_run(c, N, m, C, tau0, dtau, nsteps, stride, out_m, out_C):
    dm1 = np.empty(6)
    dm2 = np.empty(6)
    dm3 = np.empty(6)
    dm4 = np.empty(6)
    dC1 = np.empty((6, 6))
    dC2 = np.empty((6, 6))
    dC3 = np.empty((6, 6))
    dC4 = np.empty((6, 6))
    S = np.empty((6, 6))
    k = 0
    for s in range(nsteps):
        tau = tau0 + s * dtau
        half = 0.5 * dtau
        _mf_derivative(c, m, C, tau, N, dm1, dC1, S)
        _mf_derivative(c, m + half * dm1, C + half * dC1, tau + half, N,
                       dm2, dC2, S)
        _mf_derivative(c, m + half * dm2, C + half * dC2, tau + half, N,
                       dm3, dC3, S)
        _mf_derivative(c, m + dtau * dm3, C + dtau * dC3, tau + dtau, N,
                       dm4, dC4, S)
        sixth = dtau / 6.0
        for i in range(6):
            m[i] += sixth * (dm1[i] + 2.0 * (dm2[i] + dm3[i]) + dm4[i])
            for j in range(6):
                C[i, j] += sixth * (dC1[i, j] + 2.0 * (dC2[i, j] + dC3[i, j])
                                    + dC4[i, j])
        if (s + 1) % stride == 0 and k < out_m.shape[0]:
            for i in range(6):
                out_m[k, i] = m[i]
                for j in range(6):
                    out_C[k, i, j] = C[i, j]
            k += 1
    return tau0 + nsteps * dtau


def noise_matrix(params: PhysicalParams, noise: NoiseSpec | None = None,
                 scaled: bool = True) -> np.ndarray:
    """Diffusion matrix N of the covariance equation (rates over omega_bar
    when `scaled`)."""
    noise = noise or NoiseSpec()
    wb = params.omega_bar if scaled else 1.0
    return np.diag([params.kappa * (2 * noise.nbar_a + 1) / wb,
                    params.kappa * (2 * noise.nbar_a + 1) / wb,
                    0.0,
                    params.gamma1 * (2 * noise.nbar_1 + 1) / wb,
                    0.0,
                    params.gamma2 * (2 * noise.nbar_2 + 1) / wb])


@dataclass
class MeanfieldResult:
    """Sampled mean-field evolution; quadrature means and covariances."""

    t: np.ndarray             # (nt,) seconds
    means: np.ndarray         # (nt, 6) in (x, y, q1, p1, q2, p2)
    covs: np.ndarray          # (nt, 6, 6)

    def log_negativity(self) -> np.ndarray:
        return np.array([logarithmic_negativity(C) for C in self.covs])

    def duan(self, alpha: float = 1.0) -> np.ndarray:
        return np.array([duan_sum(C, alpha) for C in self.covs])


VACUUM_COV = 0.5 * np.eye(6)


def meanfield_evolve(params: PhysicalParams, coupling: CouplingSet,
                     drive: DriveSpec | None = None, t_end: float = 0.0,
                     dt: float | None = None, sample_stride: int = 1,
                     noise: NoiseSpec | None = None,
                     mean0: np.ndarray | None = None,
                     cov0: np.ndarray | None = None) -> MeanfieldResult:
    """Linearized first-order evolution of means and covariance (RK4).

    Defaults start from vacuum (zero means, C = I/2).  `mean0` is given in
    quadratures (x, y, q1, p1, q2, p2).  This propagator is only
    meaningful for the first-order tier; higher-order couplings in
    `coupling` are ignored.
    """
    if t_end <= 0.0:
        raise ValueError("t_end must be positive")
    if sample_stride < 1:
        raise ValueError("sample_stride must be >= 1")
    wb = params.omega_bar
    if dt is None:
        dt = 0.005 / wb
    dtau = dt * wb
    nsteps = max(1, round(t_end / dt))
    nsteps -= nsteps % sample_stride
    nsteps = max(nsteps, sample_stride)
    nsamp = nsteps // sample_stride

    c = _kernels.pack_constants(params, coupling, drive)
    N = noise_matrix(params, noise)
    if mean0 is None:
        m = np.zeros(6)
    else:
        mean0 = np.asarray(mean0, dtype=float)
        m = np.array([mean0[0] / SQRT2, mean0[1] / SQRT2,
                      mean0[2], mean0[3], mean0[4], mean0[5]])
    C = np.array(VACUUM_COV if cov0 is None else cov0, dtype=float)

    out_m = np.empty((nsamp, 6))
    out_C = np.empty((nsamp, 6, 6))
    _mf_run(c, N, m, C, 0.0, dtau, nsteps, sample_stride, out_m, out_C)
    if not (np.all(np.isfinite(out_m)) and np.all(np.isfinite(out_C))):
        raise NonFiniteError(t_end)
    t = dt * sample_stride * np.arange(1, nsamp + 1)
    means = out_m.copy()
    means[:, 0] *= SQRT2
    means[:, 1] *= SQRT2
    covs = 0.5 * (out_C + np.transpose(out_C, (0, 2, 1)))
    return MeanfieldResult(t=t, means=means, covs=covs)


def error_metric(en_stochastic, en_meanfield, t, t1: float,
                 t2: float) -> float:
    """Mean absolute deviation sigma(Er) = (1/(t2-t1)) * int |Ens - Enm| dt."""
    t = np.asarray(t, dtype=float)
    er = np.abs(np.asarray(en_stochastic) - np.asarray(en_meanfield))
    if t2 <= t1:
        raise ValueError("need t2 > t1")
    mask = (t >= t1) & (t <= t2)
    if mask.sum() < 2:
        raise ValueError("window contains fewer than 2 samples")
    return float(np.trapezoid(er[mask], t[mask]) / (t[mask][-1] - t[mask][0]))


def two_mode_squeezed_cov(r: float, nbar: float = 0.0) -> np.ndarray:
    """Mechanical 4x4 covariance of a symmetric two-mode squeezed state.

    Var(q_j) = Var(p_j) = (2 nbar + 1) cosh(2r)/2 with cross correlations
    -sinh(2r)/2 in q and +sinh(2r)/2 in p; E_n = 2r for nbar = 0.
    """
    ch = (2 * nbar + 1) * math.cosh(2.0 * r) / 2.0
    sh = (2 * nbar + 1) * math.sinh(2.0 * r) / 2.0
    return np.array([[ch, 0.0, -sh, 0.0],
                     [0.0, ch, 0.0, sh],
                     [-sh, 0.0, ch, 0.0],
                     [0.0, sh, 0.0, ch]])
