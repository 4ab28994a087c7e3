"""(mu/mu_w, lambda)-CMA-ES with box bounds and a noisy-objective incumbent.

Default strategy parameters follow Hansen's CMA-ES tutorial. Candidates
leaving the box are resampled up to ``resample_tries`` times, then clipped;
the clipped point is what the objective sees and what the update uses.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from rydpulse import seeding

log = logging.getLogger(__name__)

# objective(genomes (lambda, d), generation, domain) -> values (lambda,)
Objective = Callable[..., np.ndarray]


@dataclass
class CmaesConfig:
    dimension: int = 50
    population_size: int = 100
    generations: int = 300
    lower: float | np.ndarray = 0.0
    upper: float | np.ndarray = 2.0 * math.pi
    initial_mean: float | np.ndarray | None = None  # None -> box centre
    initial_sigma_fraction: float = 0.3
    resample_tries: int = 10
    reevaluate_every: int = 10
    eigen_floor: float = 1e-14

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.initial_sigma_fraction <= 0:
            raise ValueError("initial_sigma_fraction must be > 0")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.broadcast_to(np.asarray(self.lower, float), (self.dimension,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, float), (self.dimension,)).copy()
        return lo, hi


@dataclass
class CmaesState:
    generation: int
    mean: np.ndarray
    sigma: float
    cov: np.ndarray
    p_sigma: np.ndarray
    p_c: np.ndarray
    best_genome: np.ndarray
    best_value: float
    best_evaluations: int
    history: list[dict] = field(default_factory=list)


@dataclass
class CmaesResult:
    best_genome: np.ndarray
    best_value: float
    state: CmaesState

    @property
    def history(self) -> list[dict]:
        return self.state.history


class _Params:
    def __init__(self, n: int, lam: int):
        mu = lam // 2
        w = math.log((lam + 1) / 2) - np.log(np.arange(1, mu + 1))
        self.weights = w / w.sum()
        self.mu = mu
        self.mu_eff = 1.0 / np.sum(self.weights**2)
        me = self.mu_eff
        self.c_sigma = (me + 2) / (n + me + 5)
        self.d_sigma = 1 + 2 * max(0.0, math.sqrt((me - 1) / (n + 1)) - 1) + self.c_sigma
        self.c_c = (4 + me / n) / (n + 4 + 2 * me / n)
        self.c_1 = 2 / ((n + 1.3) ** 2 + me)
        self.c_mu = min(1 - self.c_1, 2 * (me - 2 + 1 / me) / ((n + 2) ** 2 + me))
        self.chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))


def _eigen(cov: np.ndarray, floor: float):
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    top = max(vals.max(), 0.0)
    if top <= 0 or not np.all(np.isfinite(vals)):
        log.warning("covariance degenerate; resetting to identity")
        n = cov.shape[0]
        return np.eye(n), np.ones(n), np.eye(n)
    if vals.min() < floor * top:
        log.debug("flooring covariance eigenvalues")
        vals = np.maximum(vals, floor * top)
        cov = (vecs * vals) @ vecs.T
    return cov, np.sqrt(vals), vecs


def initial_cmaes_state(config: CmaesConfig) -> CmaesState:
    lo, hi = config.bounds()
    n = config.dimension
    if config.initial_mean is None:
        mean = 0.5 * (lo + hi)
    else:
        mean = np.broadcast_to(np.asarray(config.initial_mean, float), (n,)).copy()
    span = float(np.max(hi - lo))
    return CmaesState(
        0, mean, config.initial_sigma_fraction * span, np.eye(n),
        np.zeros(n), np.zeros(n), mean.copy(), math.inf, 0,
    )


def _sample(state: CmaesState, config: CmaesConfig, B, D, rng):
    lo, hi = config.bounds()
    lam, n = config.population_size, config.dimension
    x = np.empty((lam, n))
    for k in range(lam):
        for _ in range(config.resample_tries):
            cand = state.mean + state.sigma * (B @ (D * rng.standard_normal(n)))
            if np.all(cand >= lo) and np.all(cand <= hi):
                break
        x[k] = np.clip(cand, lo, hi)
    return x


def cmaes_step(state: CmaesState, config: CmaesConfig, objective: Objective, seed: int) -> CmaesState:
    p = _Params(config.dimension, config.population_size)
    n = config.dimension
    g = state.generation + 1
    cov, D, B = _eigen(state.cov, config.eigen_floor)
    rng = seeding.stream(seed, seeding.CMAES, 0, g)
    x = _sample(state, config, B, D, rng)
    values = np.asarray(objective(x, g), dtype=float)
    values = np.where(np.isfinite(values), values, np.inf)
    order = np.argsort(values, kind="stable")

    best_genome, best_value, best_count = state.best_genome, state.best_value, state.best_evaluations
    if values[order[0]] < best_value:
        best_genome, best_value, best_count = x[order[0]].copy(), float(values[order[0]]), 1
    if config.reevaluate_every and g % config.reevaluate_every == 0 and math.isfinite(best_value):
        again = float(np.asarray(objective(best_genome[None, :], g, seeding.REEVALUATION))[0])
        best_value = (best_value * best_count + again) / (best_count + 1)
        best_count += 1

    y = (x[order[: p.mu]] - state.mean) / state.sigma
    y_w = p.weights @ y
    mean = state.mean + state.sigma * y_w

    inv_sqrt = (B / D) @ B.T
    p_sigma = (1 - p.c_sigma) * state.p_sigma + math.sqrt(p.c_sigma * (2 - p.c_sigma) * p.mu_eff) * (inv_sqrt @ y_w)
    norm_ps = np.linalg.norm(p_sigma)
    h_sigma = norm_ps / math.sqrt(1 - (1 - p.c_sigma) ** (2 * g)) < (1.4 + 2 / (n + 1)) * p.chi_n
    p_c = (1 - p.c_c) * state.p_c + h_sigma * math.sqrt(p.c_c * (2 - p.c_c) * p.mu_eff) * y_w
    delta_h = (1 - h_sigma) * p.c_c * (2 - p.c_c)
    rank_mu = (y.T * p.weights) @ y
    cov = (
        (1 - p.c_1 - p.c_mu) * cov
        + p.c_1 * (np.outer(p_c, p_c) + delta_h * cov)
        + p.c_mu * rank_mu
    )
    sigma = state.sigma * math.exp((p.c_sigma / p.d_sigma) * (norm_ps / p.chi_n - 1))

    prev = state.history[-1]["best_ever"] if state.history else math.inf
    history = state.history + [{
        "generation": g,
        "best": float(values[order[0]]),
        "median": float(np.median(values)),
        "best_ever": min(prev, best_value),
        "incumbent": best_value,
        "sigma": sigma,
    }]
    return CmaesState(g, mean, sigma, cov, p_sigma, p_c, best_genome, best_value, best_count, history)


def run_cmaes(
    config: CmaesConfig,
    objective: Objective,
    seed: int,
    state: CmaesState | None = None,
    on_generation: Callable[[CmaesState], None] | None = None,
    stop_after: int | None = None,
) -> CmaesResult:
    """Minimise ``objective`` for ``config.generations`` generations.

    ``objective(genomes, generation)`` returns one value per row; it is also
    called as ``objective(genome[None], generation, seeding.REEVALUATION)``
    every ``reevaluate_every`` generations to average fresh noise into the
    incumbent's estimate. ``best_ever`` in the history is the running
    minimum of the incumbent estimate and never increases.
    """
    if state is None:
        state = initial_cmaes_state(config)
    last = config.generations if stop_after is None else min(stop_after, config.generations)
    while state.generation < last:
        state = cmaes_step(state, config, objective, seed)
        if on_generation:
            on_generation(state)
    return CmaesResult(state.best_genome, state.best_value, state)
