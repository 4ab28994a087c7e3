"""Experiment orchestration: configs in, CSV/SVG/checkpoint files out."""

from __future__ import annotations

import json
import logging
import os
import pickle
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rydpulse import __version__, io, seeding
from rydpulse.cmaes import CmaesConfig, CmaesState, run_cmaes
from rydpulse.config import RunConfig, load, loads
from rydpulse.evaluator import WORKERS_ENV, EvaluationBudget, GateProblem, batch_evaluate
from rydpulse.noise import SpectralNoiseModel, evaluate_noise, sample_realization
from rydpulse.nsga3 import Nsga3Config, Nsga3State, run_nsga3
from rydpulse.plotting import plot_front

log = logging.getLogger(__name__)

CHECKPOINT = "checkpoint.pkl"


class CheckpointMismatchError(ValueError):
    pass


@dataclass
class RunOutcome:
    output_dir: Path
    completed: bool
    generation: int
    result: object = None


def resolve_workers(config: RunConfig) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    if config.run.workers > 0:
        return config.run.workers
    return os.cpu_count() or 1


def noise_model(config: RunConfig) -> SpectralNoiseModel:
    n = config.noise
    return SpectralNoiseModel(n.noise_level, n.harmonic_count, n.max_freq)


def gate_problem(config: RunConfig, fixed_duration: float | None = None, workers: int | None = None) -> GateProblem:
    d = config.dynamics
    budget = EvaluationBudget(
        trajectory_count=config.evaluator.trajectory_count,
        substeps=d.substeps,
        master_seed=config.run.seed,
        common_random_numbers=config.evaluator.common_random_numbers,
    )
    return GateProblem(
        noise_model(config), budget, d.slice_count, d.pulse_area,
        (d.duration_min, d.duration_max), fixed_duration,
        workers if workers is not None else resolve_workers(config),
    )


def nsga3_config(config: RunConfig) -> Nsga3Config:
    n = config.nsga3
    return Nsga3Config(
        crossover_prob=n.crossover_prob,
        crossover_eta=n.crossover_eta,
        crossover_variable_prob=n.crossover_variable_prob,
        mutation_prob=n.mutation_prob or None,
        mutation_eta=n.mutation_eta,
        divisions=n.divisions,
        population_size=n.population_size,
        generations=n.generations,
    )


def cmaes_setup(config: RunConfig, problem: GateProblem) -> CmaesConfig:
    c = config.cmaes
    lower, upper = problem.lower, problem.upper
    mean = np.full(lower.size, c.initial_phase)
    if c.optimize_duration:
        mean[-1] = 0.5 * (lower[-1] + upper[-1])
    return CmaesConfig(
        dimension=lower.size,
        population_size=c.population_size,
        generations=c.generations,
        lower=lower,
        upper=upper,
        initial_mean=mean,
        initial_sigma_fraction=c.initial_sigma_fraction,
        reevaluate_every=c.reevaluate_every,
    )


# ---------------------------------------------------------------------------
# files


def write_manifest(config: RunConfig, out: Path) -> None:
    manifest = {
        "package": "rydpulse",
        "version": __version__,
        "fingerprint": config.fingerprint(),
        "config": config.to_dict(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    (out / "config.ini").write_text(config.to_ini())


def save_checkpoint(out: Path, config: RunConfig, state) -> Path:
    payload = {
        "version": __version__,
        "algorithm": config.run.algorithm,
        "fingerprint": config.fingerprint(),
        "config_ini": config.to_ini(),
        "state": state,
    }
    path = out / CHECKPOINT
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        pickle.dump(payload, fh, protocol=4)
    os.replace(tmp, path)
    return path


def _checkpointer(out, config, last):
    every = config.run.checkpoint_every

    def hook(state):
        if state.generation % every == 0 or state.generation == last:
            save_checkpoint(out, config, state)

    return hook


# ---------------------------------------------------------------------------
# algorithms


def _run_nsga3(config: RunConfig, out: Path, state: Nsga3State | None, stop_after) -> RunOutcome:
    problem = gate_problem(config)
    ncfg = nsga3_config(config)
    dim = problem.lower.size
    elog = io.EvaluationLog(out / "log.csv", dim)
    elog.start(keep_through=state.generation if state is not None else None)
    last = ncfg.generations if stop_after is None else min(stop_after, ncfg.generations)
    result = run_nsga3(
        ncfg, problem, config.run.seed, state=state,
        on_evaluated=lambda g, genomes, est: elog.append(g, genomes, est),
        on_generation=_checkpointer(out, config, last),
        stop_after=stop_after,
    )
    s = result.state
    if s.generation < ncfg.generations:
        return RunOutcome(out, False, s.generation, result)
    io.write_front(out / "front.csv", s.archive_genomes, s.archive_objectives, s.archive_stderrs, s.archive_found)
    io.write_rows(
        out / "population.csv",
        ["generation", "F", "G", "F_stderr", "G_stderr"] + io.genome_header(dim),
        [[int(f), *o, *e, *g] for g, o, e, f in zip(s.genomes, s.objectives, s.stderrs, s.found)],
    )
    plot_front(out / "front.csv", out / "front.svg")
    return RunOutcome(out, True, s.generation, result)


def _run_cmaes(config: RunConfig, out: Path, state: CmaesState | None, stop_after) -> RunOutcome:
    c = config.cmaes
    problem = gate_problem(config, fixed_duration=None if c.optimize_duration else c.duration)
    ccfg = cmaes_setup(config, problem)
    full_dim = problem.full_genome(problem.lower).size
    elog = io.EvaluationLog(out / "log.csv", full_dim)
    elog.start(keep_through=state.generation if state is not None else None)

    def objective(genomes, generation, domain=seeding.NOISE):
        estimates = problem.evaluate(genomes, generation, domain)
        kind = "reeval" if domain == seeding.REEVALUATION else "eval"
        elog.append(generation, [problem.full_genome(g) for g in genomes], estimates, kind)
        return np.array([1.0 if e.failed else e.F_mean for e in estimates])

    last = ccfg.generations if stop_after is None else min(stop_after, ccfg.generations)
    result = run_cmaes(
        ccfg, objective, config.run.seed, state=state,
        on_generation=_checkpointer(out, config, last), stop_after=stop_after,
    )
    s = result.state
    if s.generation < ccfg.generations:
        return RunOutcome(out, False, s.generation, result)
    keys = ["generation", "best", "median", "best_ever", "incumbent", "sigma"]
    io.write_rows(out / "history.csv", keys, [[h[k] for k in keys] for h in s.history])
    best = problem.full_genome(result.best_genome)
    rows = [[s.generation, "search", result.best_value, "", "", ""] + list(best)]
    if c.validation_trajectories:
        budget = EvaluationBudget(
            c.validation_trajectories, config.dynamics.substeps, config.run.seed, 0,
            domain=seeding.VALIDATION,
        )
        e = batch_evaluate([best], problem.model, budget, problem.pulse_area, problem.workers)[0]
        rows.append([s.generation, "validation", e.F_mean, e.G_mean, e.F_stderr, e.G_stderr] + list(best))
    io.write_rows(
        out / "best.csv",
        ["generation", "kind", "F", "G", "F_stderr", "G_stderr"] + io.genome_header(best.size),
        rows,
    )
    return RunOutcome(out, True, s.generation, result)


def evaluation_genomes(config: RunConfig, genome_file=None) -> np.ndarray:
    e = config.evaluate
    path = genome_file or e.genome_file
    n = config.dynamics.slice_count
    if path:
        genomes = io.read_genomes(path)
        if genomes.shape[1] == n:
            genomes = np.hstack([genomes, np.full((len(genomes), 1), e.duration)])
        elif genomes.shape[1] != n + 1:
            raise ValueError(f"{path}: expected {n} or {n + 1} values per genome, got {genomes.shape[1]}")
        return genomes
    return np.append(np.full(n, e.phase), e.duration)[None, :]


def evaluate_genomes(config, genome_file=None, output_csv=None) -> Path:
    """Estimate F and G for the configured (or file-supplied) genomes.

    Writes ``<output_dir>/evaluations.csv`` unless ``output_csv`` is given.
    """
    config = _as_config(config)
    genomes = evaluation_genomes(config, genome_file)
    problem = gate_problem(config)
    estimates = batch_evaluate(list(genomes), problem.model, problem.budget, problem.pulse_area, problem.workers)
    rows = [
        [i, e.F_mean, e.G_mean, e.F_stderr, e.G_stderr, e.error or ""] + list(g)
        for i, (g, e) in enumerate(zip(genomes, estimates))
    ]
    if output_csv is None:
        out = Path(config.run.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "evaluations.csv"
    else:
        path = Path(output_csv)
        path.parent.mkdir(parents=True, exist_ok=True)
    header = ["index", "F", "G", "F_stderr", "G_stderr", "error"] + io.genome_header(genomes.shape[1])
    io.write_rows(path, header, rows)
    return path


# ---------------------------------------------------------------------------
# entry points


def _as_config(config) -> RunConfig:
    return config if isinstance(config, RunConfig) else load(config)


def run_experiment(config, output_dir=None, stop_after: int | None = None, genome_file=None) -> RunOutcome:
    """Run the experiment described by ``config`` (a path or RunConfig).

    ``stop_after`` interrupts an optimizer run after that generation,
    leaving a checkpoint for :func:`resume`.
    """
    config = _as_config(config)
    out = Path(output_dir if output_dir is not None else config.run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(config, out)
    algorithm = config.run.algorithm
    log.info("running %s into %s", algorithm, out)
    if algorithm == "nsga3":
        return _run_nsga3(config, out, None, stop_after)
    if algorithm == "cmaes":
        return _run_cmaes(config, out, None, stop_after)
    path = evaluate_genomes(config, genome_file, out / "evaluations.csv")
    return RunOutcome(out, True, 0, path)


def load_checkpoint(path) -> dict:
    with open(path, "rb") as fh:
        return pickle.load(fh)


def resume(checkpoint_path, config=None) -> RunOutcome:
    """Continue the run that wrote ``checkpoint_path``.

    Output goes to the checkpoint's directory. If ``config`` is given it
    must describe the same experiment (same fingerprint), otherwise the
    resume is refused.
    """
    checkpoint_path = Path(checkpoint_path)
    payload = load_checkpoint(checkpoint_path)
    stored = loads(payload["config_ini"])
    if stored.fingerprint() != payload["fingerprint"]:
        raise CheckpointMismatchError("checkpoint is corrupt: config does not match its fingerprint")
    if config is not None:
        given = _as_config(config)
        if given.fingerprint() != payload["fingerprint"]:
            raise CheckpointMismatchError(_describe_mismatch(stored, given))
    out = checkpoint_path.parent
    manifest = out / "manifest.json"
    if manifest.exists():
        recorded = json.loads(manifest.read_text()).get("fingerprint")
        if recorded != payload["fingerprint"]:
            raise CheckpointMismatchError(f"{manifest} belongs to a different experiment than {checkpoint_path}")
    state = payload["state"]
    log.info("resuming %s from generation %d", payload["algorithm"], state.generation)
    if payload["algorithm"] == "nsga3":
        return _run_nsga3(stored, out, state, None)
    if payload["algorithm"] == "cmaes":
        return _run_cmaes(stored, out, state, None)
    raise CheckpointMismatchError(f"cannot resume algorithm {payload['algorithm']!r}")


def _describe_mismatch(a: RunConfig, b: RunConfig) -> str:
    da, db = a.to_dict(), b.to_dict()
    diffs = [
        f"{sec}.{key}: checkpoint={da[sec][key]!r} config={db[sec][key]!r}"
        for sec in da for key in da[sec]
        if da[sec][key] != db[sec][key] and key not in ("output_dir", "workers", "checkpoint_every")
    ]
    return "config does not match checkpoint: " + "; ".join(diffs or ["fingerprint differs"])


def noise_dump(config, output_csv, duration: float = 10.0, dt: float = 1.0 / 512, realization: int = 0) -> Path:
    """Write one realization of both channels as ``t, eps_a, eps_d`` rows."""
    config = _as_config(config)
    model = noise_model(config)
    r = sample_realization(model, seeding.stream(config.run.seed, seeding.NOISE_DUMP, realization))
    t = np.arange(int(round(duration / dt)) + 1) * dt
    eps_a, eps_d = evaluate_noise(r, t)
    io.write_rows(output_csv, ["t", "eps_a", "eps_d"], zip(t, eps_a, eps_d))
    return Path(output_csv)
