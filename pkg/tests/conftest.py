import math

import pytest

from rydpulse.config import RunConfig


def small_config(tmp_path, algorithm="nsga3", **sections):
    """A config sized for unit tests: short schedules and tiny budgets."""
    base = {
        "run": {"algorithm": algorithm, "seed": 5, "output_dir": str(tmp_path / "out"), "workers": 1,
                "checkpoint_every": 2},
        "dynamics": {"slice_count": 10, "substeps": 2, "pulse_area": math.pi / 2},
        "evaluator": {"trajectory_count": 8},
        "nsga3": {"population_size": 8, "generations": 4, "divisions": 7},
        "cmaes": {"population_size": 6, "generations": 4, "reevaluate_every": 2, "validation_trajectories": 16},
    }
    for name, values in sections.items():
        base.setdefault(name, {}).update(values)
    return RunConfig().replace(**base)


@pytest.fixture
def make_config(tmp_path):
    def make(algorithm="nsga3", **sections):
        return small_config(tmp_path, algorithm, **sections)

    return make


_REPORT_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_REPORT_KEY] = []


@pytest.fixture
def acceptance_report(request, capsys):
    """Record one PASS/FAIL line for an acceptance criterion and print it."""

    def report(criterion: int, passed: bool, detail: str) -> bool:
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} | {detail}"
        request.config.stash[_REPORT_KEY].append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return passed

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_REPORT_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
