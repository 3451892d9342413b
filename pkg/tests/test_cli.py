import csv
import json
import math
import multiprocessing
import os
import signal
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twoloop import cli
from twoloop.config import RunConfig, load_config, parse_config
from twoloop.core import Entry, GenerationRecord, Individual, Trajectory
from twoloop.engine import CHECKPOINT_FILE, SUMMARY_FILE, TRAJECTORY_FILE

EXPORT_HEADER = ["generation", "mean_fitness", "std_fitness", "best_fitness", "best_so_far"]


@pytest.fixture
def write_config(make_config, tmp_path):
    def factory(name="config.json", **overrides):
        path = tmp_path / name
        make_config(**overrides).save(path)
        return path

    return factory


def _read_export(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == EXPORT_HEADER
    return [[float(v) for v in row] for row in rows[1:]]


def _interrupted_cli_run(config_path, kill_after):
    """``twoloop run`` in a forked child that is SIGKILLed right after ``kill_after`` is checkpointed."""

    def target():
        loop = cli.run_generation_loop

        def killing_loop(*args, **kw):
            def hook(record):
                if record.generation == kill_after:
                    os.kill(os.getpid(), signal.SIGKILL)

            return loop(*args, on_generation=hook, **kw)

        cli.run_generation_loop = killing_loop
        cli.main(["run", str(config_path)])

    proc = multiprocessing.get_context("fork").Process(target=target)
    proc.start()
    proc.join()
    return proc.exitcode


class TestRun:
    def test_sphere_grid_summary(self, write_config, tmp_path):
        path = write_config(optimizer="grid", optimizer_params={"resolution": 3}, population_size=9,
                            optimizee_params={"dimension": 2}, generations=1)
        assert cli.main(["run", str(path)]) == 0
        summary = json.loads((tmp_path / "results" / "run" / SUMMARY_FILE).read_text())
        assert summary["best_fitness"] == 0.0
        assert summary["best_individual"] == {"x": [0.0, 0.0]}
        assert summary["generations_executed"] == 1

    def test_outputs_written(self, write_config, tmp_path):
        assert cli.main(["run", str(write_config())]) == 0
        out = tmp_path / "results" / "run"
        assert {p.name for p in out.iterdir()} >= {TRAJECTORY_FILE, CHECKPOINT_FILE, SUMMARY_FILE, "config.json"}

    def test_unknown_optimizer(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "version": 1,\n  "run_name": "r",\n  "optimizee": "sphere",\n'
                        '  "optimizer": "simplex",\n  "population_size": 4,\n  "generations": 2\n}\n')
        assert cli.main(["run", str(path)]) == 2
        err = capsys.readouterr().err
        assert f"{path}:5:" in err and "simplex" in err

    def test_invalid_json_is_line_anchored(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "version": 1,\n  "run_name": "r"\n  "optimizee": "sphere"\n}\n')
        assert cli.main(["run", str(path)]) == 2
        assert f"{path}:4:" in capsys.readouterr().err

    def test_semantic_error_exit_2(self, write_config, capsys):
        path = write_config(optimizer="mga", population_size=7)
        assert cli.main(["run", str(path)]) == 2
        assert str(path) in capsys.readouterr().err
        assert cli.main(["run", str(write_config(fitness_weights=[1.0, 1.0]))]) == 2

    def test_mid_run_failure_exit_1(self, write_config, tmp_path, capsys):
        # the simulator works for one generation of 4, then every call fails and the optimizer cannot step
        script = tmp_path / "flaky.py"
        script.write_text(
            "import pathlib, sys\n"
            f"counter = pathlib.Path({str(tmp_path / 'calls')!r})\n"
            "n = int(counter.read_text()) if counter.exists() else 0\n"
            "counter.write_text(str(n + 1))\n"
            "if n >= 4:\n"
            "    sys.exit(1)\n"
            "pathlib.Path(sys.argv[1]).write_text('fitness\\n1\\n')\n")
        path = write_config(optimizee="external",
                            optimizee_params={"parameters": {"a": {"lower": [0.0], "upper": [1.0]}}},
                            external={"command": f"{sys.executable} {script} {{fitness_file}}"}, generations=3,
                            population_size=4)
        assert cli.main(["run", str(path)]) == 1
        assert "checkpoint is intact" in capsys.readouterr().err
        ckpt = json.loads((tmp_path / "results" / "run" / CHECKPOINT_FILE).read_text())
        assert ckpt["generation"] == 0 and not ckpt["completed"]

    def test_mountain_car_summary_deterministic(self, write_config, tmp_path):
        common = dict(optimizee="mountain_car", optimizee_params={}, population_size=8, generations=3,
                      worst_fitness=-2.0)
        assert cli.main(["run", str(write_config("a.json", run_name="a", **common))]) == 0
        assert cli.main(["run", str(write_config("b.json", run_name="b", **common))]) == 0
        a = json.loads((tmp_path / "results" / "a" / SUMMARY_FILE).read_text())
        b = json.loads((tmp_path / "results" / "b" / SUMMARY_FILE).read_text())
        a.pop("run_name")
        b.pop("run_name")
        assert a == b

    def test_overrides(self, write_config, tmp_path):
        assert cli.main(["run", str(write_config()), "--seed", "3", "--generations", "2", "--max-parallel", "2"]) == 0
        saved = load_config(tmp_path / "results" / "run" / "config.json")
        assert (saved.seed, saved.generations, saved.max_parallel) == (3, 2, 2)
        assert len(Trajectory.read_jsonl(tmp_path / "results" / "run" / TRAJECTORY_FILE)) == 2

    def test_module_entry_point(self, write_config):
        proc = subprocess.run([sys.executable, "-m", "twoloop", "validate", str(write_config())],
                              capture_output=True, text=True)
        assert proc.returncode == 0 and "ok" in proc.stdout

    def test_bad_arguments(self):
        assert cli.main(["frobnicate"]) == 2


class TestResume:
    def test_interrupted_run_completes(self, write_config, tmp_path):
        path = write_config(generations=10)
        assert _interrupted_cli_run(path, kill_after=5) == -signal.SIGKILL
        out = tmp_path / "results" / "run"
        assert len(Trajectory.read_jsonl(out / TRAJECTORY_FILE)) == 6
        assert cli.main(["resume", str(out)]) == 0
        assert len(Trajectory.read_jsonl(out / TRAJECTORY_FILE)) == 10

    def test_resumed_equals_uninterrupted(self, write_config, tmp_path):
        assert cli.main(["run", str(write_config("full.json", run_name="full", generations=10))]) == 0
        _interrupted_cli_run(write_config("part.json", run_name="part", generations=10), kill_after=5)
        assert cli.main(["resume", str(tmp_path / "results" / "part")]) == 0
        full = (tmp_path / "results" / "full" / TRAJECTORY_FILE).read_bytes()
        assert (tmp_path / "results" / "part" / TRAJECTORY_FILE).read_bytes() == full

    def test_completed_run_is_noop(self, write_config, tmp_path, capsys):
        assert cli.main(["run", str(write_config())]) == 0
        out = tmp_path / "results" / "run"
        before = (out / TRAJECTORY_FILE).read_bytes()
        capsys.readouterr()
        assert cli.main(["resume", str(out)]) == 0
        assert "nothing to do" in capsys.readouterr().out
        assert (out / TRAJECTORY_FILE).read_bytes() == before

    def test_missing_checkpoint(self, tmp_path):
        assert cli.main(["resume", str(tmp_path / "nowhere")]) == 2

    def test_corrupt_checkpoint(self, write_config, tmp_path):
        path = write_config(generations=10)
        _interrupted_cli_run(path, kill_after=2)
        (tmp_path / "results" / "run" / CHECKPOINT_FILE).write_text("{")
        assert cli.main(["resume", str(tmp_path / "results" / "run")]) == 2

    def test_seed_override_rejected(self, write_config, tmp_path):
        _interrupted_cli_run(write_config(generations=10), kill_after=2)
        assert cli.main(["resume", str(tmp_path / "results" / "run"), "--seed", "99"]) == 2


class TestExport:
    def _trajectory(self, rows):
        traj = Trajectory("t", 0)
        for g, row in enumerate(rows):
            traj.append(GenerationRecord(g, tuple(
                Entry(Individual(g, i, {"x": [0.0]}), np.array([f]), f, "ok") for i, f in enumerate(row))))
        return traj

    def _write(self, tmp_path, rows):
        out = tmp_path / "res"
        out.mkdir()
        (out / TRAJECTORY_FILE).write_text("".join(r.to_json_line() for r in self._trajectory(rows)))
        return out

    def test_two_values(self, tmp_path):
        out = self._write(tmp_path, [[0.0, 1.0]])
        assert cli.main(["export", str(out), str(tmp_path / "e.csv")]) == 0
        assert _read_export(tmp_path / "e.csv") == [[0.0, 0.5, 0.5, 1.0, 1.0]]

    def test_empty_trajectory(self, tmp_path):
        (tmp_path / "res").mkdir()
        (tmp_path / "res" / TRAJECTORY_FILE).write_text("")
        assert cli.main(["export", str(tmp_path / "res"), str(tmp_path / "e.csv")]) == 2
        assert cli.main(["export", str(tmp_path / "missing"), str(tmp_path / "e.csv")]) == 2

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=5), min_size=1, max_size=8))
    def test_best_so_far_non_decreasing(self, rows):
        values = [r["best_so_far"] for r in cli.export_rows(self._trajectory(rows))]
        assert values == sorted(values)
        assert values[-1] == max(max(r) for r in rows)

    def test_matches_independent_recompute(self, write_config, tmp_path):
        assert cli.main(["run", str(write_config(generations=6))]) == 0
        out = tmp_path / "results" / "run"
        assert cli.main(["export", str(out), str(tmp_path / "e.csv")]) == 0
        expected, running = [], -math.inf
        with open(out / TRAJECTORY_FILE) as fh:
            for line in fh:
                record = json.loads(line)
                f = [e["weighted_fitness"] for e in record["entries"] if e["status"] == "ok"]
                running = max(running, max(f))
                mean = math.fsum(f) / len(f)
                std = math.sqrt(math.fsum((v - mean) ** 2 for v in f) / len(f))
                expected.append([record["generation"], mean, std, max(f), running])
        got = _read_export(tmp_path / "e.csv")
        assert len(got) == len(expected)
        for g, e in zip(got, expected):
            assert g[0] == e[0] and g[3:] == e[3:]
            assert g[1:3] == pytest.approx(e[1:3], rel=1e-12, abs=1e-12)


class TestConfig:
    def test_validate(self, write_config, capsys):
        assert cli.main(["validate", str(write_config())]) == 0
        assert "ok" in capsys.readouterr().out
        assert cli.main(["validate", str(write_config(population_size=0))]) == 2

    def test_unknown_field(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"version": 1, "run_name": "r", "optimizee": "sphere", "optimizer": "ga",
                                    "population_size": 4, "generations": 2, "sa": {}}))
        assert cli.main(["validate", str(path)]) == 2

    @settings(max_examples=40, deadline=None)
    @given(optimizer=st.sampled_from(["ga", "ce", "sa", "es", "gd"]), pop=st.integers(4, 40),
           gens=st.integers(1, 500), seed=st.integers(0, 2**32 - 1), parallel=st.integers(1, 16),
           timeout=st.one_of(st.none(), st.floats(0.1, 1e4)), weights=st.one_of(st.none(), st.just([2.0])))
    def test_round_trip(self, optimizer, pop, gens, seed, parallel, timeout, weights):
        cfg = RunConfig(run_name="rt", optimizee="sphere", optimizer=optimizer, population_size=pop, generations=gens,
                        seed=seed, max_parallel=parallel, timeout_seconds=timeout, fitness_weights=weights,
                        optimizee_params={"dimension": 2})
        once = parse_config(json.loads(cfg.to_json()))
        assert once == cfg
        assert parse_config(json.loads(once.to_json())) == once
