"""Estimate mechanical entanglement from a stochastic c-number ensemble.

Vacuum-seeded Langevin trajectories reproduce the symmetric-ordered
moments of the quantum state: averaging quadrature outer products over
the ensemble rebuilds the covariance matrix, from which the
logarithmic negativity and the Duan sum follow.  Unlike the linearized
mean-field benchmark, the ensemble can run the full interference model,
so it captures what the all-orders coupling does to the entanglement.
The run below is deliberately small; scale n_realizations up for real
error bars (the statistical error falls like 1/sqrt(N)).

Run:  python3 demos/05_entanglement_ensemble.py   (about two minutes)
"""
import math

import numpy as np

from optomem import DriveSpec, ModelTier, NoiseSpec, table1_params
from optomem.ensemble import EnsembleSpec, run_ensemble
from optomem.model import coupling_coefficients

TWO_PI = 2.0 * math.pi


def main():
    w1 = TWO_PI * 235e3
    params = table1_params(omega1=w1, omega2=1.1 * w1, L=0.009,
                           Delta=-TWO_PI * 235.5e3)
    lam = params.wavelength
    coupling = coupling_coefficients(params, -0.09 * lam, 0.09 * lam)

    den1 = abs(1j * (TWO_PI * 235.5e3 - params.omega1) + params.kappa)
    den2 = abs(1j * (TWO_PI * 235.5e3 + params.omega2) + params.kappa)
    s = 3e-7
    drive = DriveSpec(E1=s * 12163.6 * params.omega1 * den1 / abs(coupling.g1),
                      E2=s * 45180.3 * params.omega1 * den2 / abs(coupling.g2),
                      omega_tone1=params.omega1, omega_tone2=params.omega2)

    wb = params.omega_bar
    taus = np.array([500.0, 1000.0, 1500.0, 2000.0])
    spec = EnsembleSpec(n_realizations=400, master_seed=7,
                        tier=ModelTier.FIRST_ORDER, params=params,
                        coupling=coupling, sample_times=taus / wb,
                        drive=drive, noise=NoiseSpec(), dt=0.01 / wb,
                        shard_size=100)
    result = run_ensemble(spec)

    print(f"N = {result.n_realized} vacuum-seeded trajectories "
          f"(seed {result.master_seed})")
    print(f"{'tau':>8} {'E_n':>8} {'Duan sum':>10}")
    for tau, en, duan in zip(taus, result.negativity, result.duan):
        print(f"{tau:8.0f} {en:8.4f} {duan:10.4f}")
    print("at N = 400 the estimator is statistics-limited; the underlying "
          "E_n builds to ~0.15 by tau ~ 1.2e4 (see the mean-field demo)")


if __name__ == "__main__":
    main()
