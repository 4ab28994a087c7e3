"""Noise-resilient pi-pulse design for a two-level Rydberg transition.

Monte Carlo estimation of gate infidelity and Rydberg residence time under
pink amplitude/dephasing noise, optimized with NSGA-III and CMA-ES.
"""

__version__ = "0.1.0"

from rydpulse.dynamics import (
    HamiltonianSample,
    PulseSchedule,
    TrajectoryResult,
    infidelity_of,
    propagate,
    rydberg_population,
    slice_propagator,
)
from rydpulse.noise import (
    NoiseRealization,
    SpectralNoiseModel,
    covariance_theoretical,
    evaluate_noise,
    sample_realization,
)
from rydpulse.evaluator import (
    EvaluationBudget,
    ObjectiveEstimate,
    batch_evaluate,
    estimate_objectives,
)

__all__ = [
    "HamiltonianSample",
    "PulseSchedule",
    "TrajectoryResult",
    "infidelity_of",
    "propagate",
    "rydberg_population",
    "slice_propagator",
    "NoiseRealization",
    "SpectralNoiseModel",
    "covariance_theoretical",
    "evaluate_noise",
    "sample_realization",
    "EvaluationBudget",
    "ObjectiveEstimate",
    "batch_evaluate",
    "estimate_objectives",
]
