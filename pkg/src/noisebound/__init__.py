"""Closed quantum dynamics under stochastic Hamiltonian noise.

Simulates ideal and noisy Schroedinger evolution, evaluates analytic
fidelity lower bounds and a quantum speed limit, and verifies the bounds
against Monte Carlo trajectory ensembles.
"""

from noisebound.qcore import (
    DensityMatrix,
    HermitianOperator,
    StateVector,
    bures_angle,
    expm_hermitian,
    fidelity,
    identity,
    ket,
    pauli,
    tensor,
    variance,
)
from noisebound.sde import (
    NoiseChannel,
    NoiseConditionError,
    Schedule,
    StepperKind,
    Trajectory,
    ideal_propagate,
    noisy_step,
    simulate_trajectory,
    validate_noise,
)
from noisebound.bounds import (
    BoundReport,
    QslReport,
    control_time_lower_bound,
    fidelity_lower_bound,
    gamma_max_bound,
    integrate_gamma_squared,
    qsl_time,
)
from noisebound.ensemble import (
    EnsembleConfig,
    EnsembleStats,
    check_bound,
    check_expectation_state,
    check_overlap_decay,
    run_ensemble,
)

__version__ = "0.1.0"
