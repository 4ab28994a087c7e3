"""Monte Carlo estimates of infidelity F and Rydberg time G."""

from __future__ import annotations

import logging
import math
import os
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from rydpulse import seeding
from rydpulse._kernels import propagate_batch
from rydpulse.dynamics import (
    DEFAULT_PULSE_AREA,
    DEFAULT_SUBSTEPS,
    InvalidInputError,
    PulseSchedule,
)
from rydpulse.noise import SpectralNoiseModel, realization_stream

log = logging.getLogger(__name__)

#: Candidate counter word used when all candidates share realizations.
CRN_CANDIDATE = (1 << 64) - 1

WORKERS_ENV = "RYDPULSE_WORKERS"


class InvalidCandidateError(ValueError):
    """A candidate could not be simulated."""


@dataclass(frozen=True)
class EvaluationBudget:
    trajectory_count: int = 200
    substeps: int = DEFAULT_SUBSTEPS
    master_seed: int = 0
    generation: int = 0
    common_random_numbers: bool = False
    domain: int = seeding.NOISE

    def __post_init__(self):
        if self.trajectory_count < 1:
            raise ValueError(f"trajectory_count must be >= 1, got {self.trajectory_count}")
        if self.substeps < 1:
            raise ValueError(f"substeps must be >= 1, got {self.substeps}")

    def at_generation(self, generation: int) -> EvaluationBudget:
        return replace(self, generation=generation)


@dataclass(frozen=True)
class ObjectiveEstimate:
    F_mean: float
    F_stderr: float
    G_mean: float
    G_stderr: float
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    @classmethod
    def failure(cls, message: str) -> ObjectiveEstimate:
        nan = float("nan")
        return cls(nan, nan, nan, nan, message)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((values - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def noise_coefficients(model: SpectralNoiseModel, budget: EvaluationBudget, candidate_index: int):
    """Scaled (K, 2, M) amplitude and dephasing coefficients for one candidate.

    Realization ``i`` is drawn from the stream keyed by
    ``(master_seed, generation, candidate, i)``.
    """
    m = model.harmonic_count
    k = budget.trajectory_count
    candidate = CRN_CANDIDATE if budget.common_random_numbers else candidate_index
    z = np.empty((k, 4 * m))
    for i in range(k):
        rng = realization_stream(budget.master_seed, budget.generation, candidate, i, budget.domain)
        z[i] = rng.standard_normal(4 * m)
    z = z.reshape(k, 2, 2, m)
    norm = math.sqrt(m)
    amp = z[:, 0] * (model.amplitude_level / norm)
    det = z[:, 1] * (model.dephasing_level / norm)
    return np.ascontiguousarray(amp), np.ascontiguousarray(det)


def estimate_objectives(
    schedule: PulseSchedule,
    model: SpectralNoiseModel,
    budget: EvaluationBudget,
    candidate_index: int = 0,
    pulse_area: float = DEFAULT_PULSE_AREA,
) -> ObjectiveEstimate:
    """Average per-trajectory infidelity and Rydberg time over the budget.

    Deterministic for fixed ``(master_seed, generation, candidate_index)``.
    With zero noise a single trajectory is propagated, since every
    realization would give the same result.
    """
    if not math.isfinite(pulse_area):
        raise InvalidCandidateError("pulse_area must be finite")
    if model.noise_level == 0.0:
        m = model.harmonic_count
        amp = det = np.zeros((1, 2, m))
    else:
        amp, det = noise_coefficients(model, budget, candidate_index)
    _, infid, rtime = propagate_batch(
        schedule.phases, schedule.duration, budget.substeps, float(pulse_area), 0.0,
        model.frequencies, amp, det,
    )
    if not (np.all(np.isfinite(infid)) and np.all(np.isfinite(rtime))):
        raise InvalidCandidateError("propagation produced non-finite values")
    f_mean, f_err = _mean_stderr(infid)
    g_mean, g_err = _mean_stderr(rtime)
    f_mean = min(max(f_mean, 0.0), 1.0)
    g_mean = min(max(g_mean, 0.0), schedule.duration)
    return ObjectiveEstimate(f_mean, f_err, g_mean, g_err)


def _safe_estimate(schedule, model, budget, index, pulse_area) -> ObjectiveEstimate:
    try:
        if not isinstance(schedule, PulseSchedule):
            schedule = PulseSchedule.from_genome(schedule)
        return estimate_objectives(schedule, model, budget, index, pulse_area)
    except (InvalidInputError, InvalidCandidateError, FloatingPointError) as exc:
        log.warning("candidate %d failed: %s", index, exc)
        return ObjectiveEstimate.failure(str(exc))


def batch_evaluate(
    population: Sequence[PulseSchedule | np.ndarray],
    model: SpectralNoiseModel,
    budget: EvaluationBudget,
    pulse_area: float = DEFAULT_PULSE_AREA,
    workers: int | None = None,
) -> list[ObjectiveEstimate]:
    """Evaluate every candidate; element ``i`` uses ``candidate_index = i``.

    Entries may be schedules or raw genomes ``[phases..., T]``. A failing
    candidate yields an estimate with ``error`` set; the batch still
    completes. The output does not depend on ``workers``.
    """
    if len(population) == 0:
        raise ValueError("population must be non-empty")
    workers = default_workers() if workers is None else max(1, int(workers))

    def job(i):
        return _safe_estimate(population[i], model, budget, i, pulse_area)

    if workers == 1 or len(population) == 1:
        return [job(i) for i in range(len(population))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, range(len(population))))


class GateProblem:
    """Genome-level adapter between the optimizers and the simulator.

    Genomes are ``[phi_0 .. phi_{N-1}, T]``; with ``fixed_duration`` set the
    genome holds only the phases and ``T`` is taken from it.
    """

    def __init__(
        self,
        model: SpectralNoiseModel,
        budget: EvaluationBudget,
        slice_count: int = 50,
        pulse_area: float = DEFAULT_PULSE_AREA,
        duration_bounds: tuple[float, float] = (1.0, 5.0),
        fixed_duration: float | None = None,
        workers: int | None = None,
    ):
        self.model = model
        self.budget = budget
        self.slice_count = slice_count
        self.pulse_area = pulse_area
        self.duration_bounds = duration_bounds
        self.fixed_duration = fixed_duration
        self.workers = workers

    @property
    def lower(self) -> np.ndarray:
        lo = np.zeros(self.slice_count)
        return lo if self.fixed_duration is not None else np.append(lo, self.duration_bounds[0])

    @property
    def upper(self) -> np.ndarray:
        hi = np.full(self.slice_count, 2.0 * math.pi)
        return hi if self.fixed_duration is not None else np.append(hi, self.duration_bounds[1])

    @property
    def max_duration(self) -> float:
        return self.fixed_duration if self.fixed_duration is not None else self.duration_bounds[1]

    def full_genome(self, genome: np.ndarray) -> np.ndarray:
        if self.fixed_duration is not None:
            return np.append(genome, self.fixed_duration)
        return np.asarray(genome, dtype=float)

    def evaluate(self, genomes: np.ndarray, generation: int, domain: int = seeding.NOISE) -> list[ObjectiveEstimate]:
        budget = replace(self.budget, generation=generation, domain=domain)
        full = [self.full_genome(g) for g in genomes]
        return batch_evaluate(full, self.model, budget, self.pulse_area, self.workers)

    def infidelity(self, genomes: np.ndarray, generation: int, domain: int = seeding.NOISE) -> np.ndarray:
        """F estimates with failed candidates mapped to the worst value 1."""
        estimates = self.evaluate(genomes, generation, domain)
        return np.array([1.0 if e.failed else e.F_mean for e in estimates])
