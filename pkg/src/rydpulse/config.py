"""Run configuration: INI file with one section per subsystem.

Example::

    [run]
    algorithm = nsga3
    seed = 1
    output_dir = runs/noise10

    [noise]
    noise_level = 0.1

Keys omitted from the file take the defaults below. Unknown sections or
keys are rejected with a message naming them.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from rydpulse.dynamics import DEFAULT_PULSE_AREA

ALGORITHMS = ("nsga3", "cmaes", "evaluate-only")


class ConfigError(ValueError):
    pass


@dataclass
class RunSection:
    algorithm: str = "nsga3"
    seed: int = 0
    output_dir: str = "run"
    workers: int = 0  # 0 -> available parallelism
    checkpoint_every: int = 10


@dataclass
class DynamicsSection:
    slice_count: int = 50
    substeps: int = 8
    pulse_area: float = DEFAULT_PULSE_AREA
    duration_min: float = 1.0
    duration_max: float = 5.0


@dataclass
class NoiseSection:
    noise_level: float = 0.10
    harmonic_count: int = 25
    max_freq: float = 100.0


@dataclass
class EvaluatorSection:
    trajectory_count: int = 200
    common_random_numbers: bool = False


@dataclass
class Nsga3Section:
    crossover_prob: float = 1.0
    crossover_eta: float = 30.0
    crossover_variable_prob: float = 1.0
    mutation_prob: float = 0.0  # 0 -> 1 / number of decision variables
    mutation_eta: float = 20.0
    divisions: int = 99
    population_size: int = 100
    generations: int = 200


@dataclass
class CmaesSection:
    population_size: int = 100
    generations: int = 300
    duration: float = 1.0
    optimize_duration: bool = False
    initial_phase: float = math.pi
    initial_sigma_fraction: float = 0.3
    reevaluate_every: int = 10
    validation_trajectories: int = 2000


@dataclass
class EvaluateSection:
    phase: float = 0.0
    duration: float = 1.0
    genome_file: str = ""


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    dynamics: DynamicsSection = field(default_factory=DynamicsSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    evaluator: EvaluatorSection = field(default_factory=EvaluatorSection)
    nsga3: Nsga3Section = field(default_factory=Nsga3Section)
    cmaes: CmaesSection = field(default_factory=CmaesSection)
    evaluate: EvaluateSection = field(default_factory=EvaluateSection)

    def __post_init__(self):
        self.validate()

    def validate(self):
        def need(cond, key, msg):
            if not cond:
                raise ConfigError(f"{key}: {msg}")

        need(self.run.algorithm in ALGORITHMS, "run.algorithm", f"must be one of {ALGORITHMS}")
        need(self.run.seed >= 0, "run.seed", "must be >= 0")
        need(self.run.workers >= 0, "run.workers", "must be >= 0")
        need(self.run.checkpoint_every >= 1, "run.checkpoint_every", "must be >= 1")
        d = self.dynamics
        need(d.slice_count >= 1, "dynamics.slice_count", "must be >= 1")
        need(d.substeps >= 1, "dynamics.substeps", "must be >= 1")
        need(math.isfinite(d.pulse_area) and d.pulse_area > 0, "dynamics.pulse_area", "must be positive")
        need(0 < d.duration_min <= d.duration_max, "dynamics.duration_min", "need 0 < duration_min <= duration_max")
        need(math.isfinite(d.duration_max), "dynamics.duration_max", "must be finite")
        need(self.noise.noise_level >= 0, "noise.noise_level", "must be >= 0")
        need(self.noise.harmonic_count >= 1, "noise.harmonic_count", "must be >= 1")
        need(self.noise.max_freq >= 1, "noise.max_freq", "must be >= 1")
        need(self.evaluator.trajectory_count >= 1, "evaluator.trajectory_count", "must be >= 1")
        n = self.nsga3
        need(0 <= n.crossover_prob <= 1, "nsga3.crossover_prob", "must be in [0, 1]")
        need(0 <= n.crossover_variable_prob <= 1, "nsga3.crossover_variable_prob", "must be in [0, 1]")
        need(0 <= n.mutation_prob <= 1, "nsga3.mutation_prob", "must be in [0, 1]")
        need(n.crossover_eta >= 0, "nsga3.crossover_eta", "must be >= 0")
        need(n.mutation_eta >= 0, "nsga3.mutation_eta", "must be >= 0")
        need(n.divisions >= 1, "nsga3.divisions", "must be >= 1")
        need(n.population_size >= 2, "nsga3.population_size", "must be >= 2")
        need(n.generations >= 0, "nsga3.generations", "must be >= 0")
        c = self.cmaes
        need(c.population_size >= 2, "cmaes.population_size", "must be >= 2")
        need(c.generations >= 0, "cmaes.generations", "must be >= 0")
        need(c.duration > 0, "cmaes.duration", "must be > 0")
        need(c.initial_sigma_fraction > 0, "cmaes.initial_sigma_fraction", "must be > 0")
        need(0 <= c.initial_phase <= 2 * math.pi, "cmaes.initial_phase", "must be in [0, 2*pi]")
        need(c.reevaluate_every >= 0, "cmaes.reevaluate_every", "must be >= 0")
        need(c.validation_trajectories >= 0, "cmaes.validation_trajectories", "must be >= 0")
        need(self.evaluate.duration > 0, "evaluate.duration", "must be > 0")
        need(0 <= self.evaluate.phase <= 2 * math.pi, "evaluate.phase", "must be in [0, 2*pi]")

    # -- serialisation -----------------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_ini(self) -> str:
        lines = []
        for sec in fields(self):
            lines.append(f"[{sec.name}]")
            for f in fields(getattr(self, sec.name)):
                lines.append(f"{f.name} = {_format(getattr(getattr(self, sec.name), f.name))}")
            lines.append("")
        return "\n".join(lines)

    def fingerprint(self) -> str:
        """Hash of every setting that can change results."""
        d = self.to_dict()
        d["run"] = {k: v for k, v in d["run"].items() if k not in ("output_dir", "workers", "checkpoint_every")}
        return hashlib.sha256(repr(sorted((k, sorted(v.items())) for k, v in d.items())).encode()).hexdigest()

    def replace(self, **sections) -> RunConfig:
        """Copy with per-section overrides, e.g. ``replace(noise={"noise_level": 0.2})``."""
        data = self.to_dict()
        for name, values in sections.items():
            if name not in data:
                raise ConfigError(f"unknown section [{name}]")
            for key in values:
                if key not in data[name]:
                    raise ConfigError(f"{name}.{key}: unknown key")
            data[name].update(values)
        return from_dict(data)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(raw: str, kind, key: str):
    raw = raw.strip()
    try:
        if kind is bool or kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int or kind == "int":
            return int(raw)
        if kind is float or kind == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {getattr(kind, '__name__', kind)}") from None


def from_dict(data: dict) -> RunConfig:
    sections = {}
    for sec in fields(RunConfig):
        cls = sec.default_factory
        values = dict(data.get(sec.name, {}))
        known = {f.name: f for f in fields(cls)}
        for key in values:
            if key not in known:
                raise ConfigError(f"{sec.name}.{key}: unknown key")
        parsed = {}
        for key, value in values.items():
            kind = known[key].type
            parsed[key] = _parse(value, kind, f"{sec.name}.{key}") if isinstance(value, str) and kind != "str" else value
        sections[sec.name] = cls(**parsed)
    extra = set(data) - {f.name for f in fields(RunConfig)}
    if extra:
        raise ConfigError(f"unknown section [{sorted(extra)[0]}]")
    return RunConfig(**sections)


def loads(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__", inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return from_dict({name: dict(parser[name]) for name in parser.sections()})


def load(path) -> RunConfig:
    return loads(Path(path).read_text())


def dump(config: RunConfig, path) -> None:
    Path(path).write_text(config.to_ini())
