import csv
import json

import numpy as np
import pytest

from rydpulse import io, runner
from rydpulse.cli import main
from rydpulse.config import dump
from rydpulse.nsga3 import nondominated_mask

OUTPUTS_NSGA3 = ("log.csv", "front.csv", "population.csv", "front.svg")
OUTPUTS_CMAES = ("log.csv", "history.csv", "best.csv")


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def snapshot(out, names):
    return {n: (out / n).read_bytes() for n in names}


def test_evaluate_only_pi_pulse(make_config, tmp_path):
    cfg = make_config("evaluate-only", noise={"noise_level": 0.0}, dynamics={"substeps": 256},
                      evaluate={"phase": 0.0, "duration": 1.0})
    outcome = runner.run_experiment(cfg)
    rows = read_csv(outcome.output_dir / "evaluations.csv")
    assert len(rows) == 1
    assert float(rows[0]["F"]) <= 1e-10
    assert float(rows[0]["G"]) == pytest.approx(0.5, abs=1e-4)
    manifest = json.loads((outcome.output_dir / "manifest.json").read_text())
    assert manifest["config"]["noise"]["noise_level"] == 0.0
    assert "version" in manifest and manifest["fingerprint"] == cfg.fingerprint()


def test_evaluate_genome_file(make_config, tmp_path):
    genomes = tmp_path / "g.txt"
    genomes.write_text("# two schedules\n" + ",".join(["0"] * 10) + "\n" + " ".join(["1.0"] * 10) + "\n")
    cfg = make_config("evaluate-only")
    path = runner.evaluate_genomes(cfg, genomes, tmp_path / "e.csv")
    rows = read_csv(path)
    assert len(rows) == 2 and rows[1]["T"] == "1"
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2 3\n")
    with pytest.raises(ValueError, match="expected 10 or 11"):
        runner.evaluate_genomes(cfg, bad, tmp_path / "e2.csv")


def test_nsga3_run_outputs(make_config):
    outcome = runner.run_experiment(make_config())
    out = outcome.output_dir
    assert outcome.completed
    for name in OUTPUTS_NSGA3 + ("manifest.json", "config.ini", "checkpoint.pkl"):
        assert (out / name).exists(), name
    front = io.read_front(out / "front.csv")
    obj = np.array([[r["F"], r["G"]] for r in front])
    assert nondominated_mask(obj).all()
    assert all(len(r["genome"]) == 11 for r in front)
    log = read_csv(out / "log.csv")
    assert len(log) == 8 * 5
    assert {int(r["generation"]) for r in log} == set(range(5))
    assert (out / "front.svg").read_text().startswith("<svg")


def test_reruns_are_byte_identical_across_workers(make_config, tmp_path):
    a = runner.run_experiment(make_config(), tmp_path / "a").output_dir
    b = runner.run_experiment(make_config(run={"workers": 3}), tmp_path / "b").output_dir
    assert snapshot(a, OUTPUTS_NSGA3) == snapshot(b, OUTPUTS_NSGA3)


def test_resume_reproduces_uninterrupted_run(make_config, tmp_path):
    cfg = make_config(nsga3={"generations": 20}, run={"checkpoint_every": 3})
    full = runner.run_experiment(cfg, tmp_path / "full").output_dir
    part = runner.run_experiment(cfg, tmp_path / "part", stop_after=10)
    assert not part.completed and part.generation == 10
    assert not (part.output_dir / "front.csv").exists()
    # generation 10 is off the every-3 grid but is still checkpointed as the stopping point
    outcome = runner.resume(part.output_dir / "checkpoint.pkl")
    assert outcome.completed
    assert snapshot(full, OUTPUTS_NSGA3) == snapshot(part.output_dir, OUTPUTS_NSGA3)


def test_resume_twice_is_idempotent(make_config, tmp_path):
    cfg = make_config()
    part = runner.run_experiment(cfg, tmp_path / "p", stop_after=2).output_dir
    runner.resume(part / "checkpoint.pkl")
    first = snapshot(part, OUTPUTS_NSGA3)
    runner.resume(part / "checkpoint.pkl")
    assert snapshot(part, OUTPUTS_NSGA3) == first


def test_resume_refuses_other_experiment(make_config, tmp_path):
    cfg = make_config()
    part = runner.run_experiment(cfg, tmp_path / "p", stop_after=2).output_dir
    other = tmp_path / "other.ini"
    dump(cfg.replace(run={"seed": 99}), other)
    with pytest.raises(runner.CheckpointMismatchError, match="run.seed"):
        runner.resume(part / "checkpoint.pkl", other)
    # operational keys may differ
    same = tmp_path / "same.ini"
    dump(cfg.replace(run={"workers": 2}), same)
    assert runner.resume(part / "checkpoint.pkl", same).completed


def test_cmaes_run_and_resume(make_config, tmp_path):
    cfg = make_config("cmaes")
    full = runner.run_experiment(cfg, tmp_path / "full").output_dir
    hist = read_csv(full / "history.csv")
    assert [int(h["generation"]) for h in hist] == [1, 2, 3, 4]
    best_ever = [float(h["best_ever"]) for h in hist]
    assert all(b <= a for a, b in zip(best_ever, best_ever[1:]))
    best = read_csv(full / "best.csv")
    assert [r["kind"] for r in best] == ["search", "validation"]
    assert best[0]["T"] == "1"
    log = read_csv(full / "log.csv")
    assert sum(r["kind"] == "reeval" for r in log) == 2
    part = runner.run_experiment(cfg, tmp_path / "part", stop_after=2).output_dir
    runner.resume(part / "checkpoint.pkl")
    assert snapshot(full, OUTPUTS_CMAES) == snapshot(part, OUTPUTS_CMAES)


def test_cmaes_with_duration(make_config, tmp_path):
    cfg = make_config("cmaes", cmaes={"optimize_duration": True, "validation_trajectories": 0})
    out = runner.run_experiment(cfg).output_dir
    best = read_csv(out / "best.csv")
    assert len(best) == 1 and 1.0 <= float(best[0]["T"]) <= 5.0


def test_noise_dump(make_config, tmp_path):
    path = runner.noise_dump(make_config(), tmp_path / "n.csv", duration=1.0, dt=0.25)
    rows = read_csv(path)
    assert [float(r["t"]) for r in rows] == [0, 0.25, 0.5, 0.75, 1.0]
    assert path.read_bytes() == runner.noise_dump(make_config(), tmp_path / "m.csv", 1.0, 0.25).read_bytes()


def test_cli_round_trip(make_config, tmp_path, capsys):
    ini = tmp_path / "c.ini"
    dump(make_config(), ini)
    assert main(["run", str(ini), "-o", str(tmp_path / "r"), "--stop-after", "2"]) == 0
    assert "stopped at generation 2" in capsys.readouterr().out
    assert main(["resume", str(tmp_path / "r" / "checkpoint.pkl"), "--config", str(ini)]) == 0
    assert main(["plot", str(tmp_path / "r" / "front.csv"), "-o", str(tmp_path / "f.svg")]) == 0
    assert (tmp_path / "f.svg").exists()
    assert main(["evaluate", str(ini), "-o", str(tmp_path / "e.csv")]) == 0
    assert main(["noise-dump", str(ini), "-o", str(tmp_path / "n.csv"), "--duration", "0.5"]) == 0


def test_cli_reports_bad_key(tmp_path, capsys):
    ini = tmp_path / "bad.ini"
    ini.write_text("[noise]\nnoise_levle = 0.1\n")
    assert main(["run", str(ini)]) == 2
    err = capsys.readouterr().err
    assert "noise.noise_levle" in err and err.startswith("rydpulse: error:")


def test_cli_missing_file(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.ini")]) == 2
