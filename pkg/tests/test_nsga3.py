import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rydpulse.evaluator import ObjectiveEstimate
from rydpulse.nsga3 import (
    _objectives_from,
    Nsga3Config,
    das_dennis_points,
    dominates,
    environmental_selection,
    fast_nondominated_sort,
    hypervolume_2d,
    niching_select,
    nondominated_mask,
    normalize_and_associate,
    polynomial_mutation,
    run_nsga3,
    sbx_crossover,
)

# area under the Schaffer front f2 = (sqrt(f1) - 2)^2 inside the box (4, 4),
# frozen from numerical quadrature
SCHAFFER_HV = 40.0 / 3.0


class Schaffer:
    """f1 = x1^2 + x2^2, f2 = (x1 - 2)^2 + x2^2 on [-1, 3]^2."""

    lower = np.array([-1.0, -1.0])
    upper = np.array([3.0, 3.0])
    max_duration = 100.0

    def __init__(self, scale=(1.0, 1.0), fail_every=0):
        self.scale = scale
        self.fail_every = fail_every
        self.calls = 0

    def evaluate(self, genomes, generation):
        out = []
        for x in genomes:
            self.calls += 1
            if self.fail_every and self.calls % self.fail_every == 0:
                out.append(ObjectiveEstimate.failure("synthetic"))
                continue
            f1 = (x[0] ** 2 + x[1] ** 2) * self.scale[0]
            f2 = ((x[0] - 2) ** 2 + x[1] ** 2) * self.scale[1]
            out.append(ObjectiveEstimate(f1, 0.0, f2, 0.0))
        return out


def brute_fronts(obj):
    remaining = set(range(len(obj)))
    fronts = []
    while remaining:
        front = sorted(i for i in remaining if not any(dominates(obj[j], obj[i]) for j in remaining if j != i))
        fronts.append(front)
        remaining -= set(front)
    return fronts


# -- reference points ------------------------------------------------------------


@pytest.mark.parametrize("m,p", [(2, 1), (2, 99), (3, 4), (3, 12), (4, 3)])
def test_das_dennis_count_and_simplex(m, p):
    pts = das_dennis_points(m, p)
    assert len(pts) == math.comb(m + p - 1, p)
    np.testing.assert_allclose(pts.sum(axis=1), 1.0)
    assert np.all(pts >= 0)
    assert len(np.unique(np.round(pts * p).astype(int), axis=0)) == len(pts)


def test_das_dennis_bi_objective_examples():
    np.testing.assert_allclose(das_dennis_points(2, 4), [[1, 0], [0.75, 0.25], [0.5, 0.5], [0.25, 0.75], [0, 1]])
    assert len(das_dennis_points(2, 99)) == 100


def test_das_dennis_limits():
    with pytest.raises(OverflowError):
        das_dennis_points(10, 40, max_points=1000)
    with pytest.raises(ValueError):
        das_dennis_points(1, 5)


# -- sorting ---------------------------------------------------------------------


def test_sort_small_example():
    obj = np.array([[1, 4], [2, 2], [4, 1], [3, 3], [5, 5], [2, 2]])
    assert fast_nondominated_sort(obj) == [[0, 1, 2, 5], [3], [4]]


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 25), st.just(2)), elements=st.integers(0, 6).map(float)))
def test_sort_matches_brute_force(obj):
    assert [sorted(f) for f in fast_nondominated_sort(obj)] == brute_fronts(obj)


def test_nondominated_mask():
    obj = np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    assert nondominated_mask(obj).tolist() == [True, True, False]


def test_hypervolume_examples():
    assert hypervolume_2d([[1, 1]], (2, 2)) == 1.0
    assert hypervolume_2d([[0, 1], [1, 0]], (2, 2)) == 3.0
    assert hypervolume_2d([[0, 1], [1, 0], [1, 1]], (2, 2)) == 3.0
    assert hypervolume_2d([[3, 0]], (2, 2)) == 0.0
    assert hypervolume_2d(np.empty((0, 2)), (2, 2)) == 0.0


# -- association / niching ----------------------------------------------------------


def test_association_examples():
    refs = das_dennis_points(2, 2)  # (1,0), (0.5,0.5), (0,1)
    obj = np.array([[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]])
    assoc = normalize_and_associate(obj, refs)
    assert assoc.reference.tolist() == [2, 0, 1]
    np.testing.assert_allclose(assoc.distance, 0.0, atol=1e-7)


def test_association_is_scale_invariant():
    rng = np.random.default_rng(0)
    t = np.sort(rng.random(20))
    obj = np.column_stack([t, (1 - np.sqrt(t)) ** 2])
    refs = das_dennis_points(2, 12)
    a = normalize_and_associate(obj, refs)
    for scale in ([10.0, 10.0], [1e-4, 1e3]):
        b = normalize_and_associate(obj * scale + [5, -2], refs)
        np.testing.assert_array_equal(a.reference, b.reference)
        np.testing.assert_allclose(a.distance, b.distance, atol=1e-9)


def test_niching_prefers_empty_niche_and_closest_member():
    reference = np.array([0, 0, 1, 1])
    distance = np.array([0.3, 0.1, 0.2, 0.5])
    niche = np.array([1, 0])
    picked = niching_select([0, 1, 2, 3], reference, distance, niche, 1, np.random.default_rng(0))
    assert picked == [2]
    niche = np.array([0, 5])
    picked = niching_select([0, 1, 2, 3], reference, distance, niche, 1, np.random.default_rng(0))
    assert picked == [1]


def test_environmental_selection_keeps_whole_fronts_first():
    obj = np.array([[0, 3], [3, 0], [1, 1], [2, 2], [4, 4], [5, 5]], dtype=float)
    keep = environmental_selection(obj, das_dennis_points(2, 4), 4, np.random.default_rng(0))
    assert sorted(keep) == [0, 1, 2, 3]


# -- variation --------------------------------------------------------------------


def test_sbx_preserves_mean_and_bounds():
    rng = np.random.default_rng(1)
    lo, hi = np.zeros(5), np.full(5, 10.0)
    for _ in range(200):
        p1, p2 = rng.uniform(2, 8, 5), rng.uniform(2, 8, 5)
        c1, c2 = sbx_crossover(p1, p2, lo, hi, 1.0, 15.0, rng)
        assert np.all((c1 >= lo) & (c1 <= hi) & (c2 >= lo) & (c2 <= hi))
        inside = (c1 > 0) & (c1 < 10) & (c2 > 0) & (c2 < 10)
        np.testing.assert_allclose((c1 + c2)[inside], (p1 + p2)[inside])


def test_sbx_spread_distribution():
    # the spread factor beta has cdf 0.5 * beta^(eta+1) below 1
    rng = np.random.default_rng(2)
    eta = 10.0
    p1, p2 = np.full(1, 4.0), np.full(1, 6.0)
    betas = []
    for _ in range(20000):
        c1, c2 = sbx_crossover(p1, p2, [-1e9], [1e9], 1.0, eta, rng)
        betas.append(abs(c1[0] - c2[0]) / 2.0)
    betas = np.array(betas)
    for b in (0.8, 0.9, 0.95):
        expected = 0.5 * b ** (eta + 1)
        assert np.mean(betas <= b) == pytest.approx(expected, abs=0.012)


def test_sbx_respects_probability():
    rng = np.random.default_rng(3)
    p1, p2 = np.zeros(3), np.ones(3)
    c1, c2 = sbx_crossover(p1, p2, np.full(3, -5.0), np.full(3, 5.0), 0.0, 30, rng)
    np.testing.assert_array_equal(c1, p1)
    np.testing.assert_array_equal(c2, p2)


def test_polynomial_mutation_bounds_and_rate():
    rng = np.random.default_rng(4)
    lo, hi = np.zeros(50), np.full(50, 2 * math.pi)
    changed = 0
    for _ in range(400):
        x = rng.uniform(lo, hi)
        y = polynomial_mutation(x, lo, hi, 0.1, 20.0, rng)
        assert np.all((y >= lo) & (y <= hi))
        changed += np.sum(y != x)
    assert changed / (400 * 50) == pytest.approx(0.1, abs=0.01)


def test_polynomial_mutation_is_symmetric_at_centre():
    rng = np.random.default_rng(5)
    x = np.full(40000, 0.5)
    y = polynomial_mutation(x, 0.0, 1.0, 1.0, 20.0, rng)
    assert abs(np.mean(y - 0.5)) < 3 * np.std(y) / math.sqrt(y.size)
    assert np.all((y >= 0) & (y <= 1))


# -- full runs ---------------------------------------------------------------------


def test_schaffer_hypervolume():
    cfg = Nsga3Config(population_size=40, generations=50, crossover_eta=15, divisions=39)
    res = run_nsga3(cfg, Schaffer(), seed=0, hv_reference=(4.0, 4.0))
    hv = res.state.archive_hv
    assert hv[-1] >= 0.95 * SCHAFFER_HV
    assert hv[-1] <= SCHAFFER_HV + 1e-9
    assert all(b >= a - 1e-12 for a, b in zip(hv, hv[1:]))


def test_archive_is_nondominated_and_in_bounds():
    res = run_nsga3(Nsga3Config(population_size=20, generations=10, divisions=19), Schaffer(), seed=1)
    _, obj, _, found = res.archive
    assert nondominated_mask(obj).all()
    assert np.all(found <= 10)
    g = res.state.genomes
    assert np.all((g >= Schaffer.lower) & (g <= Schaffer.upper))


def test_zero_generations_returns_initial_population():
    res = run_nsga3(Nsga3Config(population_size=10, generations=0, divisions=9), Schaffer(), seed=2)
    assert res.state.generation == 0 and len(res.state.genomes) == 10
    assert np.all(res.state.found == 0)


def test_run_is_deterministic_and_seeded():
    cfg = Nsga3Config(population_size=12, generations=5, divisions=11)
    a = run_nsga3(cfg, Schaffer(), seed=3).state
    b = run_nsga3(cfg, Schaffer(), seed=3).state
    c = run_nsga3(cfg, Schaffer(), seed=4).state
    np.testing.assert_array_equal(a.genomes, b.genomes)
    assert not np.array_equal(a.genomes, c.genomes)


def test_resume_matches_uninterrupted_run():
    cfg = Nsga3Config(population_size=12, generations=8, divisions=11)
    full = run_nsga3(cfg, Schaffer(), seed=5).state
    half = run_nsga3(cfg, Schaffer(), seed=5, stop_after=4).state
    assert half.generation == 4
    resumed = run_nsga3(cfg, Schaffer(), seed=5, state=half).state
    np.testing.assert_array_equal(full.genomes, resumed.genomes)
    np.testing.assert_array_equal(full.archive_objectives, resumed.archive_objectives)


def test_objective_scaling_does_not_change_search():
    cfg = Nsga3Config(population_size=12, generations=6, divisions=11)
    a = run_nsga3(cfg, Schaffer(), seed=6).state
    b = run_nsga3(cfg, Schaffer(scale=(1e-3, 50.0)), seed=6).state
    np.testing.assert_array_equal(a.genomes, b.genomes)


def test_failed_candidates_get_worst_case_objectives():
    problem = Schaffer(fail_every=2)
    obj, err = _objectives_from(problem.evaluate(np.zeros((4, 2)), 0), problem)
    np.testing.assert_array_equal(obj[1], [1.0, Schaffer.max_duration])
    np.testing.assert_array_equal(err[1], [0.0, 0.0])
    np.testing.assert_array_equal(obj[0], [0.0, 4.0])
    seen = []
    res = run_nsga3(Nsga3Config(population_size=10, generations=3, divisions=9), Schaffer(fail_every=4), seed=7,
                    on_evaluated=lambda g, x, e: seen.extend(e))
    assert any(e.failed for e in seen)
    assert res.state.generation == 3


def test_callbacks_see_every_generation():
    gens = []
    run_nsga3(Nsga3Config(population_size=6, generations=4, divisions=5), Schaffer(), seed=8,
              on_generation=lambda s: gens.append(s.generation))
    assert gens == [0, 1, 2, 3, 4]


def test_config_validation():
    with pytest.raises(ValueError):
        Nsga3Config(population_size=1)
    with pytest.raises(ValueError):
        Nsga3Config(crossover_prob=1.5)
    with pytest.raises(NotImplementedError):
        Nsga3Config(adaptive_reference_points=True)


# -- small hand-checked cases ---------------------------------------------------------


def test_das_dennis_small_cases():
    np.testing.assert_array_equal(das_dennis_points(2, 1), [[1, 0], [0, 1]])
    assert len(das_dennis_points(3, 2)) == 6
    pts = das_dennis_points(2, 99)
    assert [0.0, 1.0] in pts.tolist() and [1.0, 0.0] in pts.tolist()


def test_sort_hand_examples():
    assert fast_nondominated_sort(np.array([[1, 2], [2, 1], [3, 3]])) == [[0, 1], [2]]
    assert fast_nondominated_sort(np.array([[4.0, 2.0]])) == [[0]]
    assert fast_nondominated_sort(np.array([[3, 3], [1, 1], [2, 2]])) == [[1], [2], [0]]


def test_association_degenerate_cases():
    refs = das_dennis_points(2, 4)
    same = normalize_and_associate(np.ones((5, 2)), refs)
    assert np.all(same.distance == same.distance[0])
    assert np.all(same.reference == same.reference[0])
    axes = normalize_and_associate(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert axes.reference.tolist() == [0, 1]
    np.testing.assert_allclose(axes.distance, 0.0, atol=1e-12)


def test_niching_trivial_slots():
    rng = np.random.default_rng(0)
    ref, dist = np.array([0, 1, 1]), np.zeros(3)
    assert niching_select([0, 1, 2], ref, dist, np.zeros(2, dtype=int), 0, rng) == []
    assert niching_select([0, 1, 2], ref, dist, np.zeros(2, dtype=int), 3, rng) == [0, 1, 2]
    # niche counts (0, 3): the member of the empty niche wins
    assert niching_select([0, 1, 2], ref, dist, np.array([0, 3]), 1, rng) == [0]


def test_sbx_limits():
    rng = np.random.default_rng(9)
    p = rng.uniform(0, 6, 51)
    c1, c2 = sbx_crossover(p, p, 0.0, 2 * math.pi, 1.0, 30.0, rng)
    np.testing.assert_array_equal(c1, p)
    np.testing.assert_array_equal(c2, p)
    q = rng.uniform(0, 6, 51)
    c1, c2 = sbx_crossover(p, q, 0.0, 2 * math.pi, 1.0, 1e6, rng)
    assert max(np.max(np.abs(c1 - p)), np.max(np.abs(c2 - q))) < 1e-3


def test_sbx_mean_preserving_for_fixed_parents():
    rng = np.random.default_rng(10)
    p1, p2 = np.array([1.0, 2.0]), np.array([3.0, 2.5])
    kids = np.array([np.concatenate(sbx_crossover(p1, p2, -1e6, 1e6, 1.0, 5.0, rng)) for _ in range(10000)])
    pooled = np.concatenate([kids[:, :2], kids[:, 2:]])
    se = pooled.std(axis=0, ddof=1) / math.sqrt(len(pooled))
    assert np.all(np.abs(pooled.mean(axis=0) - (p1 + p2) / 2) <= 3 * se + 1e-12)


def test_polynomial_mutation_edge_cases():
    rng = np.random.default_rng(11)
    x = rng.uniform(0, 1, 20)
    np.testing.assert_array_equal(polynomial_mutation(x, 0.0, 1.0, 0.0, 20.0, rng), x)
    y = polynomial_mutation(np.zeros(10000), 0.0, 1.0, 1.0, 20.0, rng)
    assert np.all(y >= 0.0)


def test_mutation_rate_one_over_51():
    rng = np.random.default_rng(12)
    pm, trials = 1 / 51, 10000
    changed = sum(np.sum(polynomial_mutation(x, 0.0, 2 * math.pi, pm, 20.0, rng) != x)
                  for x in rng.uniform(0, 2 * math.pi, (trials, 51)))
    se = math.sqrt(pm * (1 - pm) / (trials * 51))
    assert abs(changed / (trials * 51) - pm) <= 3 * se
