"""Two-membrane cavity optomechanics simulator.

Exact (all-orders) dispersive coupling between two membranes and a driven
cavity mode, plus the truncated first- and second-order models, with tools
for limit-cycle synchronization analysis and Gaussian-entanglement
Monte-Carlo ensembles.
"""

from .params import PhysicalParams, table1_params, zero_point_amplitude
from .model import (
    CouplingSet,
    DomainError,
    cavity_shift,
    coupling_coefficients,
    coupling_gradient,
    interference_kernel,
    membrane_reflectivity,
)
from .dynamics import (
    DriveSpec,
    ModelTier,
    NoiseSpec,
    NonFiniteError,
    SystemState,
    Trajectory,
    integrate,
)
from .quantum import (
    CovarianceState,
    MeanfieldResult,
    NonPhysicalCovariance,
    duan_sum,
    ensemble_moments,
    error_metric,
    logarithmic_negativity,
    meanfield_evolve,
    phase_space_histogram,
)

__all__ = [
    "DriveSpec",
    "ModelTier",
    "NoiseSpec",
    "NonFiniteError",
    "SystemState",
    "Trajectory",
    "integrate",
    "CovarianceState",
    "MeanfieldResult",
    "NonPhysicalCovariance",
    "duan_sum",
    "ensemble_moments",
    "error_metric",
    "logarithmic_negativity",
    "meanfield_evolve",
    "phase_space_histogram",
    "PhysicalParams",
    "table1_params",
    "zero_point_amplitude",
    "CouplingSet",
    "DomainError",
    "cavity_shift",
    "coupling_coefficients",
    "coupling_gradient",
    "interference_kernel",
    "membrane_reflectivity",
]

__version__ = "0.1.0"
