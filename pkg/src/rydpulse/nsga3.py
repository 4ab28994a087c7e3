"""NSGA-III for bound-constrained bi-objective minimisation.

Reference-point based non-dominated sorting (Deb & Jain, 2014) with SBX
crossover and bounded polynomial mutation. All randomness is drawn from
counter-based streams keyed by (seed, generation, slot), so a run can be
resumed from any saved generation and reproduce the uninterrupted result.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from rydpulse import seeding
from rydpulse.evaluator import ObjectiveEstimate

log = logging.getLogger(__name__)

# counter words for the NSGA-III stream domain
_INIT = 0
_MATING = 1
_NICHING = 2


class Problem(Protocol):
    lower: np.ndarray
    upper: np.ndarray
    max_duration: float

    def evaluate(self, genomes: np.ndarray, generation: int) -> list[ObjectiveEstimate]: ...


@dataclass
class Nsga3Config:
    crossover_prob: float = 1.0
    crossover_eta: float = 30.0
    crossover_variable_prob: float = 1.0
    mutation_prob: float | None = None  # None -> 1 / dimension
    mutation_eta: float = 20.0
    n_objectives: int = 2
    divisions: int = 99
    population_size: int = 100
    generations: int = 200
    adaptive_reference_points: bool = False

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValueError("crossover_prob must be in [0, 1]")
        if self.mutation_prob is not None and not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError("mutation_prob must be in [0, 1]")
        if self.adaptive_reference_points:
            raise NotImplementedError("adaptive reference points are not implemented")


# ---------------------------------------------------------------------------
# reference points


def das_dennis_points(n_objectives: int, divisions: int, max_points: int = 10**6) -> np.ndarray:
    """All simplex-lattice points with coordinates in {0, 1/P, ..., 1}.

    Returns ``C(M + P - 1, P)`` rows of length ``M``, ordered
    lexicographically by decreasing first coordinate.
    """
    if n_objectives < 2:
        raise ValueError("need at least two objectives")
    if divisions < 1:
        raise ValueError("divisions must be >= 1")
    count = math.comb(n_objectives + divisions - 1, divisions)
    if count > max_points:
        raise OverflowError(f"{count} reference points exceeds the limit of {max_points}")

    points = []

    def fill(prefix, remaining, slots):
        if slots == 1:
            points.append(prefix + [remaining])
            return
        for k in range(remaining, -1, -1):
            fill(prefix + [k], remaining - k, slots - 1)

    fill([], divisions, n_objectives)
    return np.array(points, dtype=float) / divisions


# ---------------------------------------------------------------------------
# sorting


def dominates(a, b) -> bool:
    return bool(np.all(a <= b) and np.any(a < b))


def fast_nondominated_sort(objectives) -> list[list[int]]:
    """Partition indices into successive non-dominated fronts (minimisation)."""
    obj = np.asarray(objectives, dtype=float)
    n = obj.shape[0]
    if n == 0:
        return []
    le = np.all(obj[:, None, :] <= obj[None, :, :], axis=2)
    lt = np.any(obj[:, None, :] < obj[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    counts = dom.sum(axis=0)
    fronts = []
    current = [i for i in range(n) if counts[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in np.flatnonzero(dom[i]):
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(int(j))
        current = sorted(nxt)
    return fronts


def nondominated_mask(objectives) -> np.ndarray:
    obj = np.asarray(objectives, dtype=float)
    mask = np.zeros(len(obj), dtype=bool)
    if len(obj):
        mask[fast_nondominated_sort(obj)[0]] = True
    return mask


def hypervolume_2d(points, ref) -> float:
    """Area dominated by ``points`` inside the box bounded by ``ref``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    pts = pts[np.all(pts < np.asarray(ref), axis=1)]
    if len(pts) == 0:
        return 0.0
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    area = 0.0
    best_y = ref[1]
    for x, y in pts:
        if y < best_y:
            area += (ref[0] - x) * (best_y - y)
            best_y = y
    return area


# ---------------------------------------------------------------------------
# normalisation, association, niching


@dataclass
class Association:
    reference: np.ndarray  # index of the closest reference direction
    distance: np.ndarray  # perpendicular distance to it
    normalized: np.ndarray


def _intercepts(translated: np.ndarray) -> np.ndarray:
    m = translated.shape[1]
    fallback = translated.max(axis=0)
    fallback = np.where(fallback > 1e-12, fallback, 1.0)
    # extreme points are searched after max-scaling so that per-objective
    # units cannot change which rows are picked
    scaled = translated / fallback
    weights = np.full((m, m), 1e-6) + np.eye(m) * (1.0 - 1e-6)
    extremes = np.empty((m, m))
    for i in range(m):
        asf = np.max(scaled / weights[i], axis=1)
        extremes[i] = scaled[np.argmin(asf)]
    intercepts = np.ones(m)
    try:
        plane = np.linalg.solve(extremes, np.ones(m))
        candidate = 1.0 / plane
        if np.all(np.isfinite(candidate)) and np.all(candidate > 1e-6):
            intercepts = candidate
    except np.linalg.LinAlgError:
        pass
    return intercepts * fallback


def normalize_and_associate(objectives, refs) -> Association:
    """Translate by the ideal point, scale by hyperplane intercepts and
    attach every row to the reference direction at minimal perpendicular
    distance (lowest index on ties)."""
    obj = np.asarray(objectives, dtype=float)
    refs = np.asarray(refs, dtype=float)
    translated = obj - obj.min(axis=0)
    normalized = translated / _intercepts(translated)
    unit = refs / np.linalg.norm(refs, axis=1, keepdims=True)
    proj = normalized @ unit.T
    sq = np.einsum("ij,ij->i", normalized, normalized)[:, None] - proj**2
    dist = np.sqrt(np.maximum(sq, 0.0))
    ref_index = np.argmin(dist, axis=1)
    return Association(ref_index, dist[np.arange(len(obj)), ref_index], normalized)


def niching_select(
    last_front,
    reference,
    distance,
    niche_count,
    slots: int,
    rng: np.random.Generator,
) -> list[int]:
    """Fill ``slots`` places from ``last_front`` by niche preservation.

    ``reference`` / ``distance`` are indexed by population position;
    ``niche_count[j]`` counts already-selected members attached to
    reference ``j`` and is updated in place.
    """
    last_front = list(last_front)
    if slots <= 0:
        return []
    if slots >= len(last_front):
        return last_front
    niche_count = np.asarray(niche_count)
    members: dict[int, list[int]] = {}
    for idx in last_front:
        members.setdefault(int(reference[idx]), []).append(idx)
    active = np.zeros(len(niche_count), dtype=bool)
    active[list(members)] = True

    chosen: list[int] = []
    while len(chosen) < slots:
        candidates = np.flatnonzero(active)
        counts = niche_count[candidates]
        tied = candidates[counts == counts.min()]
        j = int(tied[rng.integers(len(tied))]) if len(tied) > 1 else int(tied[0])
        pool = members[j]
        if niche_count[j] == 0:
            pick = min(pool, key=lambda i: (distance[i], i))
        else:
            pick = pool[int(rng.integers(len(pool)))]
        pool.remove(pick)
        chosen.append(pick)
        niche_count[j] += 1
        if not pool:
            active[j] = False
    return chosen


# ---------------------------------------------------------------------------
# variation


def sbx_crossover(p1, p2, lower, upper, prob: float, eta: float, rng: np.random.Generator,
                  variable_prob: float = 1.0):
    """Simulated binary crossover, children clipped to the box.

    ``beta`` follows the SBX spread distribution with index ``eta`` and
    acts symmetrically, so ``c1 + c2 == p1 + p2`` before clipping. Each
    variable takes part with probability ``variable_prob``; the others are
    copied unchanged.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    u = rng.random(p1.size)
    active = rng.random(p1.size) < variable_prob
    if rng.random() >= prob:
        return p1.copy(), p2.copy()
    with np.errstate(over="ignore", divide="ignore"):
        beta = np.where(
            u <= 0.5,
            (2.0 * u) ** (1.0 / (eta + 1.0)),
            (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0)),
        )
    beta = np.where(active, beta, 1.0)
    mean = 0.5 * (p1 + p2)
    half = 0.5 * beta * (p1 - p2)
    c1 = np.clip(mean + half, lower, upper)
    c2 = np.clip(mean - half, lower, upper)
    return c1, c2


def polynomial_mutation(x, lower, upper, prob: float, eta: float, rng: np.random.Generator) -> np.ndarray:
    """Bounded polynomial mutation applied gene-wise with probability ``prob``."""
    x = np.array(x, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), x.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), x.shape)
    hit = rng.random(x.size) < prob
    r = rng.random(x.size)
    span = upper - lower
    ok = hit & (span > 0)
    if not ok.any():
        return x
    xs, lo, sp, rr = x[ok], lower[ok], span[ok], r[ok]
    d1 = (xs - lo) / sp
    d2 = (lo + sp - xs) / sp
    power = 1.0 / (eta + 1.0)
    left = rr < 0.5
    val_l = 2.0 * rr + (1.0 - 2.0 * rr) * (1.0 - d1) ** (eta + 1.0)
    val_r = 2.0 * (1.0 - rr) + 2.0 * (rr - 0.5) * (1.0 - d2) ** (eta + 1.0)
    dq = np.where(left, val_l**power - 1.0, 1.0 - val_r**power)
    x[ok] = np.clip(xs + dq * sp, lo, lo + sp)
    return x


# ---------------------------------------------------------------------------
# main loop


@dataclass
class Nsga3State:
    """Everything needed to continue a run after ``generation``."""

    generation: int
    genomes: np.ndarray
    objectives: np.ndarray
    stderrs: np.ndarray
    found: np.ndarray  # generation each member was created in
    archive_genomes: np.ndarray
    archive_objectives: np.ndarray
    archive_stderrs: np.ndarray
    archive_found: np.ndarray
    archive_hv: list[float] = field(default_factory=list)


@dataclass
class Nsga3Result:
    state: Nsga3State
    front_indices: list[int]

    @property
    def archive(self):
        s = self.state
        return s.archive_genomes, s.archive_objectives, s.archive_stderrs, s.archive_found


def _objectives_from(estimates, problem) -> tuple[np.ndarray, np.ndarray]:
    obj = np.empty((len(estimates), 2))
    err = np.empty((len(estimates), 2))
    for i, e in enumerate(estimates):
        if e.failed:
            obj[i] = (1.0, problem.max_duration)
            err[i] = (0.0, 0.0)
        else:
            obj[i] = (e.F_mean, e.G_mean)
            err[i] = (e.F_stderr, e.G_stderr)
    return obj, err


def _update_archive(state: Nsga3State, genomes, obj, err, found):
    g = np.vstack([state.archive_genomes, genomes])
    o = np.vstack([state.archive_objectives, obj])
    e = np.vstack([state.archive_stderrs, err])
    f = np.concatenate([state.archive_found, found])
    # drop exact duplicates of objective vectors, keeping the earliest
    _, first = np.unique(o, axis=0, return_index=True)
    keep = np.zeros(len(o), dtype=bool)
    keep[first] = True
    keep &= nondominated_mask(o)
    state.archive_genomes, state.archive_objectives = g[keep], o[keep]
    state.archive_stderrs, state.archive_found = e[keep], f[keep]


def _rank_and_distance(obj, refs):
    ranks = np.empty(len(obj), dtype=int)
    for r, front in enumerate(fast_nondominated_sort(obj)):
        ranks[front] = r
    assoc = normalize_and_associate(obj, refs)
    return ranks, assoc.distance


def environmental_selection(obj, refs, size: int, rng: np.random.Generator) -> list[int]:
    fronts = fast_nondominated_sort(obj)
    selected: list[int] = []
    for front in fronts:
        if len(selected) + len(front) <= size:
            selected.extend(front)
            if len(selected) == size:
                return selected
            continue
        pool = selected + front
        assoc = normalize_and_associate(obj[pool], refs)
        ref_of = np.empty(len(obj), dtype=int)
        dist_of = np.empty(len(obj))
        ref_of[pool] = assoc.reference
        dist_of[pool] = assoc.distance
        niche = np.bincount(ref_of[selected], minlength=len(refs)) if selected else np.zeros(len(refs), dtype=int)
        selected.extend(niching_select(front, ref_of, dist_of, niche, size - len(selected), rng))
        return selected
    return selected


def _tournament(ranks, dist, rng) -> int:
    a, b = rng.integers(len(ranks), size=2)
    if (ranks[a], dist[a]) <= (ranks[b], dist[b]):
        return int(a)
    return int(b)


def make_offspring(genomes, ranks, dist, lower, upper, config: Nsga3Config, seed: int, generation: int):
    n, dim = genomes.shape
    pm = config.mutation_prob if config.mutation_prob is not None else 1.0 / dim
    children = []
    for k in range((config.population_size + 1) // 2):
        rng = seeding.stream(seed, seeding.NSGA3, _MATING, generation, k)
        p1 = genomes[_tournament(ranks, dist, rng)]
        p2 = genomes[_tournament(ranks, dist, rng)]
        c1, c2 = sbx_crossover(
            p1, p2, lower, upper, config.crossover_prob, config.crossover_eta, rng,
            config.crossover_variable_prob,
        )
        children.append(polynomial_mutation(c1, lower, upper, pm, config.mutation_eta, rng))
        children.append(polynomial_mutation(c2, lower, upper, pm, config.mutation_eta, rng))
    return np.array(children[: config.population_size])


def initial_state(config: Nsga3Config, problem: Problem, seed: int,
                  on_evaluated: Callable | None = None) -> Nsga3State:
    lower, upper = np.asarray(problem.lower, float), np.asarray(problem.upper, float)
    rng = seeding.stream(seed, seeding.NSGA3, _INIT)
    genomes = lower + rng.random((config.population_size, lower.size)) * (upper - lower)
    estimates = problem.evaluate(genomes, 0)
    obj, err = _objectives_from(estimates, problem)
    if on_evaluated:
        on_evaluated(0, genomes, estimates)
    found = np.zeros(len(genomes), dtype=int)
    dim = lower.size
    state = Nsga3State(
        0, genomes, obj, err, found,
        np.empty((0, dim)), np.empty((0, 2)), np.empty((0, 2)), np.empty(0, dtype=int),
    )
    _update_archive(state, genomes, obj, err, found)
    return state


def step(state: Nsga3State, config: Nsga3Config, problem: Problem, refs, seed: int,
         on_evaluated: Callable | None = None) -> Nsga3State:
    """Advance one generation: variation, evaluation, environmental selection."""
    g = state.generation + 1
    lower, upper = np.asarray(problem.lower, float), np.asarray(problem.upper, float)
    ranks, dist = _rank_and_distance(state.objectives, refs)
    children = make_offspring(state.genomes, ranks, dist, lower, upper, config, seed, g)
    estimates = problem.evaluate(children, g)
    c_obj, c_err = _objectives_from(estimates, problem)
    for i, e in enumerate(estimates):
        if e.failed:
            log.warning("generation %d candidate %d assigned worst-case objectives: %s", g, i, e.error)
    if on_evaluated:
        on_evaluated(g, children, estimates)
    c_found = np.full(len(children), g)

    genomes = np.vstack([state.genomes, children])
    obj = np.vstack([state.objectives, c_obj])
    err = np.vstack([state.stderrs, c_err])
    found = np.concatenate([state.found, c_found])
    rng = seeding.stream(seed, seeding.NSGA3, _NICHING, g)
    keep = environmental_selection(obj, refs, config.population_size, rng)

    new = Nsga3State(
        g, genomes[keep], obj[keep], err[keep], found[keep],
        state.archive_genomes, state.archive_objectives, state.archive_stderrs, state.archive_found,
        list(state.archive_hv),
    )
    _update_archive(new, children, c_obj, c_err, c_found)
    return new


def run_nsga3(
    config: Nsga3Config,
    problem: Problem,
    seed: int,
    state: Nsga3State | None = None,
    on_evaluated: Callable | None = None,
    on_generation: Callable[[Nsga3State], None] | None = None,
    hv_reference=None,
    stop_after: int | None = None,
) -> Nsga3Result:
    """Run (or continue from ``state``) up to ``config.generations``.

    ``on_evaluated(generation, genomes, estimates)`` sees every evaluated
    batch; ``on_generation(state)`` is called after each completed
    generation, including generation 0. ``stop_after`` ends the loop early
    at that generation, as an interruption would.
    """
    refs = das_dennis_points(config.n_objectives, config.divisions)
    if state is None:
        state = initial_state(config, problem, seed, on_evaluated)
        if hv_reference is not None:
            state.archive_hv.append(hypervolume_2d(state.archive_objectives, hv_reference))
        if on_generation:
            on_generation(state)
    last = config.generations if stop_after is None else min(stop_after, config.generations)
    while state.generation < last:
        state = step(state, config, problem, refs, seed, on_evaluated)
        if hv_reference is not None:
            state.archive_hv.append(hypervolume_2d(state.archive_objectives, hv_reference))
        if on_generation:
            on_generation(state)
    return Nsga3Result(state, fast_nondominated_sort(state.objectives)[0])
