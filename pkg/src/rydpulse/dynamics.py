"""Two-level (|1>, |r>) pulse dynamics.

Unitaries are plain ``(2, 2)`` complex numpy arrays in the basis order
(|1>, |r>), so ``<r|U|1>`` is ``U[1, 0]``. Evolution follows
``dU/dt = +i H(t) U(t)`` with

    H = [[eps_d,                 (1 + eps_a) * conj(Omega)],
         [(1 + eps_a) * Omega,  -eps_d                    ]]

and ``Omega = pulse_area * exp(i * phi)``.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from rydpulse._kernels import propagate_batch
from rydpulse.noise import NoiseRealization

TWO_PI = 2.0 * math.pi

#: Rabi-frequency modulus 2*pi*f_max with f_max = 1.
DEFAULT_PULSE_AREA = TWO_PI

#: Pulse-area constant under which phi == 0 for T = 1 is an exact pi-pulse.
#: Used by the experiment presets to reproduce the published baseline.
CALIBRATED_PULSE_AREA = math.pi / 2

#: Target pi-pulse.
TARGET = np.array([[0.0, 1.0j], [1.0j, 0.0]])

DEFAULT_SUBSTEPS = 8


class InvalidInputError(ValueError):
    """Raised for non-finite or out-of-range simulation inputs."""


def pi_pulse_duration(pulse_area: float = DEFAULT_PULSE_AREA) -> float:
    """Duration of the constant-phase noiseless pi-pulse for ``pulse_area``."""
    return math.pi / (2.0 * pulse_area)


@dataclass(frozen=True)
class PulseSchedule:
    """Piecewise-constant laser phases over a pulse of total ``duration``."""

    phases: np.ndarray
    duration: float

    def __post_init__(self):
        phases = np.array(self.phases, dtype=float).reshape(-1)
        if phases.size == 0:
            raise InvalidInputError("schedule needs at least one phase slice")
        if not np.all(np.isfinite(phases)):
            raise InvalidInputError("phases must be finite")
        if np.any(phases < 0.0) or np.any(phases > TWO_PI):
            raise InvalidInputError("phases must lie in [0, 2*pi]")
        if not math.isfinite(self.duration) or self.duration <= 0.0:
            raise InvalidInputError(f"duration must be positive and finite, got {self.duration}")
        phases.setflags(write=False)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "duration", float(self.duration))

    @property
    def slice_count(self) -> int:
        return self.phases.size

    @classmethod
    def constant(cls, phase: float = 0.0, duration: float = 1.0, slice_count: int = 50) -> PulseSchedule:
        return cls(np.full(slice_count, phase), duration)

    @classmethod
    def from_genome(cls, genome) -> PulseSchedule:
        """Build from ``[phi_0, ..., phi_{N-1}, T]``."""
        genome = np.asarray(genome, dtype=float)
        return cls(genome[:-1], float(genome[-1]))

    def to_genome(self) -> np.ndarray:
        return np.append(self.phases, self.duration)


@dataclass(frozen=True)
class HamiltonianSample:
    """Hamiltonian held constant over one propagation sub-interval."""

    detuning: float
    amplitude_factor: float
    phase: float
    base_rabi: float = DEFAULT_PULSE_AREA

    def matrix(self) -> np.ndarray:
        omega = self.base_rabi * self.amplitude_factor * np.exp(1j * self.phase)
        return np.array(
            [[self.detuning, np.conj(omega)], [omega, -self.detuning]], dtype=complex
        )


@dataclass(frozen=True)
class TrajectoryResult:
    final_unitary: np.ndarray
    rydberg_time: float
    infidelity: float = field(default=float("nan"))


def slice_propagator(h: HamiltonianSample, dt: float) -> np.ndarray:
    """Closed-form ``exp(i H dt)`` for a traceless 2x2 Hermitian ``H``.

    Uses ``H = d sz + a cos(phi) sx + a sin(phi) sy`` so that
    ``exp(i H dt) = cos(w dt) I + i sin(w dt) H / w`` with ``w = |(d, a)|``.
    """
    values = (h.detuning, h.amplitude_factor, h.phase, h.base_rabi, dt)
    if not all(math.isfinite(v) for v in values):
        raise InvalidInputError("Hamiltonian sample and dt must be finite")
    if dt < 0:
        raise InvalidInputError(f"dt must be non-negative, got {dt}")
    a = h.base_rabi * h.amplitude_factor
    w = math.hypot(h.detuning, a)
    if w == 0.0:
        return np.eye(2, dtype=complex)
    return math.cos(w * dt) * np.eye(2) + 1j * (math.sin(w * dt) / w) * h.matrix()


def infidelity_of(u: np.ndarray) -> float:
    """``1 - |Tr(U U0^dagger)|^2 / 4``, clipped to [0, 1]."""
    tr = np.trace(u @ TARGET.conj().T)
    return float(min(max(1.0 - abs(tr) ** 2 / 4.0, 0.0), 1.0))


def rydberg_population(u: np.ndarray) -> float:
    return float(min(abs(u[1, 0]) ** 2, 1.0))


def propagate_many(
    schedule: PulseSchedule,
    realizations: Sequence[NoiseRealization],
    substeps: int = DEFAULT_SUBSTEPS,
    pulse_area: float = DEFAULT_PULSE_AREA,
    start_time: float = 0.0,
):
    """Vectorised :func:`propagate` over realizations sharing one noise model.

    Returns ``(unitaries, infidelities, rydberg_times)`` arrays.
    """
    if int(substeps) != substeps or substeps < 1:
        raise InvalidInputError(f"substeps must be a positive integer, got {substeps}")
    if not math.isfinite(pulse_area) or not math.isfinite(start_time):
        raise InvalidInputError("pulse_area and start_time must be finite")
    if not realizations:
        raise InvalidInputError("need at least one noise realization")
    amp = np.stack([r.scaled_amplitude() for r in realizations])
    det = np.stack([r.scaled_dephasing() for r in realizations])
    return propagate_batch(
        schedule.phases, schedule.duration, int(substeps), float(pulse_area),
        float(start_time), realizations[0].model.frequencies, amp, det,
    )


def propagate(
    schedule: PulseSchedule,
    noise: NoiseRealization,
    substeps: int = DEFAULT_SUBSTEPS,
    pulse_area: float = DEFAULT_PULSE_AREA,
    start_time: float = 0.0,
) -> TrajectoryResult:
    """Propagate one noisy trajectory of ``schedule``.

    Each phase slice is split into ``substeps`` sub-intervals; the noise is
    sampled at the start of each sub-interval and held. ``start_time``
    offsets the noise clock, which lets a schedule be propagated in pieces.
    """
    unitaries, infid, rtime = propagate_many(schedule, [noise], substeps, pulse_area, start_time)
    return TrajectoryResult(unitaries[0], float(rtime[0]), float(infid[0]))
