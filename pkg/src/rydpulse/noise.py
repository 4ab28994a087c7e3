"""Band-limited pink noise as a random trigonometric series.

A unit-variance realization is

    X(t) = M**-0.5 * sum_n a_n cos(2 pi nu_n t) + b_n sin(2 pi nu_n t)

with ``nu_n = nu_max**(n / M)`` for ``n = 0 .. M-1`` and i.i.d. standard
normal ``a_n, b_n``. Equal weight on a log-spaced grid gives a 1/f power
spectrum between the cutoffs, and ``E[X(t + h) X(t)] = mean_n cos(2 pi nu_n h)``.

The amplitude channel is ``eps_a = level * X_a`` (relative, dimensionless)
and the dephasing channel ``eps_d = level * 2 pi * X_d`` (rad f_max).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from rydpulse import seeding


@dataclass(frozen=True)
class SpectralNoiseModel:
    noise_level: float = 0.10
    harmonic_count: int = 25
    max_freq: float = 100.0

    def __post_init__(self):
        if self.harmonic_count < 1:
            raise ValueError(f"harmonic_count must be >= 1, got {self.harmonic_count}")
        if not self.noise_level >= 0 or not math.isfinite(self.noise_level):
            raise ValueError(f"noise_level must be finite and >= 0, got {self.noise_level}")
        if not self.max_freq >= 1 or not math.isfinite(self.max_freq):
            raise ValueError(f"max_freq must be finite and >= 1, got {self.max_freq}")

    @cached_property
    def frequencies(self) -> np.ndarray:
        n = np.arange(self.harmonic_count)
        freqs = self.max_freq ** (n / self.harmonic_count)
        freqs.setflags(write=False)
        return freqs

    @property
    def amplitude_level(self) -> float:
        return self.noise_level

    @property
    def dephasing_level(self) -> float:
        return self.noise_level * 2.0 * math.pi


@dataclass(frozen=True)
class NoiseRealization:
    """One draw of both channels.

    ``amplitude`` and ``dephasing`` hold the raw standard-normal
    coefficients with shape (2, M): row 0 multiplies cosines, row 1 sines.
    """

    model: SpectralNoiseModel
    amplitude: np.ndarray
    dephasing: np.ndarray

    def scaled_amplitude(self) -> np.ndarray:
        return self.amplitude * (self.model.amplitude_level / math.sqrt(self.model.harmonic_count))

    def scaled_dephasing(self) -> np.ndarray:
        return self.dephasing * (self.model.dephasing_level / math.sqrt(self.model.harmonic_count))


def sample_realization(model: SpectralNoiseModel, rng: np.random.Generator) -> NoiseRealization:
    """Draw 4M standard normals: amplitude (cos, sin) then dephasing (cos, sin)."""
    m = model.harmonic_count
    z = rng.standard_normal(4 * m)
    return NoiseRealization(model, z[: 2 * m].reshape(2, m), z[2 * m :].reshape(2, m))


def realization_stream(master_seed: int, generation: int, candidate: int, index: int,
                       domain: int = seeding.NOISE) -> np.random.Generator:
    return seeding.stream(master_seed, domain, generation, candidate, index)


def unit_process(coefficients: np.ndarray, freqs: np.ndarray, t) -> np.ndarray:
    """Evaluate the unit-variance series for (2, M) ``coefficients`` at ``t``."""
    t = np.asarray(t, dtype=float)
    arg = 2.0 * np.pi * np.multiply.outer(t, freqs)
    total = (np.cos(arg) * coefficients[0] + np.sin(arg) * coefficients[1]).sum(axis=-1)
    return total / math.sqrt(freqs.size)


def evaluate_noise(r: NoiseRealization, t):
    """Return ``(eps_a, eps_d)`` at time(s) ``t``."""
    freqs = r.model.frequencies
    eps_a = r.model.amplitude_level * unit_process(r.amplitude, freqs, t)
    eps_d = r.model.dephasing_level * unit_process(r.dephasing, freqs, t)
    return eps_a, eps_d


def covariance_theoretical(model: SpectralNoiseModel, h) -> np.ndarray | float:
    """Autocovariance of the unit process at lag ``h``."""
    h = np.asarray(h, dtype=float)
    out = np.cos(2.0 * np.pi * np.multiply.outer(h, model.frequencies)).mean(axis=-1)
    return float(out) if out.ndim == 0 else out


def spectral_slope(
    model: SpectralNoiseModel,
    realizations: int = 200,
    rng: np.random.Generator | None = None,
    duration: float = 100.0,
    dt: float = 1.0 / 512,
    band: tuple[float, float] = (2.0, 50.0),
    bins: int = 8,
) -> float:
    """Log-log slope of the averaged periodogram of the unit process.

    The spectrum is a set of discrete lines, so the periodogram is first
    integrated over ``bins`` log-spaced bands inside ``band`` and divided
    by each band's width; the slope is fitted to those densities against
    the band's geometric centre. A 1/f process gives -1.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    t = np.arange(int(round(duration / dt))) * dt
    power = np.zeros(t.size // 2 + 1)
    for _ in range(realizations):
        r = sample_realization(model, rng)
        power += np.abs(np.fft.rfft(unit_process(r.amplitude, model.frequencies, t))) ** 2
    nu = np.fft.rfftfreq(t.size, dt)
    edges = np.geomspace(band[0], band[1], bins + 1)
    density = [power[(nu >= a) & (nu < b)].sum() / (b - a) for a, b in zip(edges, edges[1:])]
    centres = np.sqrt(edges[1:] * edges[:-1])
    return float(np.polyfit(np.log(centres), np.log(density), 1)[0])
