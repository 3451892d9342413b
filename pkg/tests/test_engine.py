import json
import multiprocessing
import os
import signal

import numpy as np
import pytest

from twoloop.core import STATUS_FAILED, Bounds, Trajectory
from twoloop.engine import (
    CHECKPOINT_FILE,
    SUMMARY_FILE,
    TIMINGS_FILE,
    TRAJECTORY_FILE,
    Optimizee,
    load_checkpoint,
    run_generation_loop,
)
from twoloop.errors import CheckpointError, ConfigurationError, OptimizerStepError


def run(config, **kw):
    optimizee, optimizer = config.build()
    return run_generation_loop(config, optimizee, optimizer, **kw)


def _killed_run(config, kill_after):
    """Run in a forked child that SIGKILLs itself once ``kill_after`` is checkpointed."""

    def target():
        def hook(record):
            if record.generation == kill_after:
                os.kill(os.getpid(), signal.SIGKILL)

        run(config, on_generation=hook)

    proc = multiprocessing.get_context("fork").Process(target=target)
    proc.start()
    proc.join()
    return proc.exitcode


class FlakyOptimizee(Optimizee):
    """Fails whenever the first coordinate exceeds 0.5."""

    def __init__(self):
        self.bounds = Bounds({"x": ([-1.0, -1.0], [1.0, 1.0])})

    def simulate(self, params, rng):
        if params["x"][0] > 0.5:
            raise RuntimeError("unstable")
        return -float(np.sum(params["x"] ** 2))


class TestLoop:
    def test_single_generation(self, make_config):
        traj = run(make_config(generations=1, population_size=4))
        assert len(traj) == 1 and len(traj.records[0].entries) == 4

    def test_grid_exhausts_in_one_generation(self, make_config):
        cfg = make_config(optimizer="grid", optimizer_params={"resolution": 3}, population_size=9, generations=5,
                          optimizee_params={"dimension": 2})
        traj = run(cfg)
        assert len(traj) == 1
        pts = {tuple(e.individual.vector()) for e in traj.records[0].entries}
        assert pts == {(a, b) for a in (-5.0, 0.0, 5.0) for b in (-5.0, 0.0, 5.0)}
        summary = json.loads((cfg.results_dir / SUMMARY_FILE).read_text())
        assert summary["best_fitness"] == 0.0 and summary["best_individual"] == {"x": [0.0, 0.0]}

    def test_grid_over_several_generations_evaluates_every_point(self, make_config):
        cfg = make_config(optimizer="grid", optimizer_params={"resolution": 5}, population_size=10, generations=100,
                          optimizee_params={"dimension": 2})
        traj = run(cfg)
        assert len(traj) == 3 and [len(r.entries) for r in traj] == [10, 10, 5]
        assert len({tuple(e.individual.vector()) for e in traj.entries()}) == 25

    def test_record_contents(self, make_config):
        cfg = make_config(generations=4, population_size=6)
        traj = run(cfg)
        assert [r.generation for r in traj] == [0, 1, 2, 3]
        assert sum(len(r.entries) for r in traj) == 6 * 4
        for r in traj:
            assert [e.individual.index for e in r.entries] == list(range(6))
            assert all(e.individual.generation == r.generation for e in r.entries)
            for e in r.entries:
                assert e.weighted_fitness == -float(np.sum(e.individual.vector() ** 2))
                assert np.all(np.abs(e.individual.vector()) <= 5.0)
            assert r.optimizer_snapshot["optimizer"] == "ga"
        on_disk = Trajectory.read_jsonl(cfg.results_dir / TRAJECTORY_FILE)
        assert [r.to_json_line() for r in on_disk] == [r.to_json_line() for r in traj]

    def test_fitness_weights(self, make_config):
        cfg = make_config(optimizee="trace_fit", optimizee_params={"stimuli": [1.0], "spike_threshold": -60.0},
                          fitness_weights=[1.0, 0.5], generations=1, population_size=4)
        for e in run(cfg).records[0].entries:
            assert e.weighted_fitness == pytest.approx(e.fitness[0] + 0.5 * e.fitness[1], abs=1e-15)

    def test_failed_entries_get_worst_fitness(self, make_config):
        cfg = make_config(population_size=8, generations=3, worst_fitness=-100.0)
        optimizee = FlakyOptimizee()
        optimizer = cfg.build()[1].__class__(optimizee.bounds, 8)
        traj = run_generation_loop(cfg, optimizee, optimizer)
        failed = [e for e in traj.entries() if e.status == STATUS_FAILED]
        assert failed, "the fixture should produce failures"
        assert all(e.weighted_fitness == -100.0 and e.fitness.tolist() == [-100.0] for e in failed)
        assert len(list(traj.entries())) == 24

    def test_wall_time_off_by_default(self, make_config):
        cfg = make_config(generations=2)
        traj = run(cfg)
        assert all(e.wall_time_s is None for e in traj.entries())
        timings = (cfg.results_dir / TIMINGS_FILE).read_text().splitlines()
        assert len(timings) == 2 and all(t >= 0 for t in json.loads(timings[0])["wall_time_s"])
        cfg = make_config(generations=1, record_wall_time=True, run_name="timed")
        assert all(e.wall_time_s is not None for e in run(cfg).entries())

    def test_worst_fitness_warning(self, make_config, caplog):
        run(make_config(worst_fitness=0.0, generations=1))
        assert "below worst_fitness" in caplog.text

    def test_all_failed_aborts_with_checkpoint_intact(self, make_config):
        class AlwaysFails(FlakyOptimizee):
            def __init__(self):
                super().__init__()
                self.calls = 0

            def simulate(self, params, rng):
                self.calls += 1
                if self.calls > 4:
                    raise RuntimeError("down")
                return 0.0

        cfg = make_config(population_size=4, generations=5, isolation="inline")
        optimizee = AlwaysFails()
        optimizer = cfg.build()[1].__class__(optimizee.bounds, 4)
        with pytest.raises(OptimizerStepError):
            run_generation_loop(cfg, optimizee, optimizer)
        ckpt = load_checkpoint(cfg.results_dir)
        assert ckpt["generation"] == 0 and not ckpt["completed"]
        assert len((cfg.results_dir / TRAJECTORY_FILE).read_text().splitlines()) == 1

    def test_invalid_budget(self, make_config):
        with pytest.raises(ConfigurationError):
            run(make_config(generations=0))


class TestDeterminism:
    @pytest.mark.parametrize("optimizer,params,pop", [
        ("ga", {}, 8), ("ce", {}, 8), ("sa", {}, 8), ("es", {}, 8), ("gd", {}, 8),
        ("mga", {"n_batches": 1, "points_per_axis": 2}, 9),
    ])
    def test_identical_trajectory_files(self, make_config, optimizer, params, pop):
        a = make_config(run_name="a", optimizer=optimizer, optimizer_params=params, population_size=pop,
                        generations=6)
        b = make_config(run_name="b", optimizer=optimizer, optimizer_params=params, population_size=pop,
                        generations=6)
        run(a)
        run(b)
        assert (a.results_dir / TRAJECTORY_FILE).read_bytes() == (b.results_dir / TRAJECTORY_FILE).read_bytes()

    def test_parallelism_does_not_change_results(self, make_config):
        a = make_config(run_name="serial", generations=3)
        b = make_config(run_name="parallel", generations=3, max_parallel=4)
        run(a)
        run(b)
        assert (a.results_dir / TRAJECTORY_FILE).read_bytes() == (b.results_dir / TRAJECTORY_FILE).read_bytes()

    def test_seed_matters(self, make_config):
        a = make_config(run_name="a", seed=1)
        b = make_config(run_name="b", seed=2)
        run(a)
        run(b)
        assert (a.results_dir / TRAJECTORY_FILE).read_bytes() != (b.results_dir / TRAJECTORY_FILE).read_bytes()


class TestResume:
    @pytest.mark.parametrize("optimizer,params,pop", [
        ("ga", {}, 8), ("enkf", {}, 8), ("ce", {}, 8), ("sa", {}, 8), ("es", {}, 8), ("gd", {}, 8),
        ("grid", {"resolution": 6}, 5), ("mga", {"n_batches": 1, "points_per_axis": 2}, 9),
    ])
    def test_kill_and_resume_is_byte_identical(self, make_config, optimizer, params, pop):
        extra = {}
        if optimizer == "enkf":
            extra = dict(optimizee="classifier", optimizee_params={})
        if optimizer == "grid":
            extra = dict(optimizee_params={"dimension": 2})
        full = make_config(run_name="full", optimizer=optimizer, optimizer_params=params, population_size=pop,
                           generations=10, **extra)
        part = make_config(run_name="part", optimizer=optimizer, optimizer_params=params, population_size=pop,
                           generations=10, **extra)
        run(full)
        assert _killed_run(part, kill_after=5) == -signal.SIGKILL
        assert load_checkpoint(part.results_dir)["generation"] == 5
        traj = run(part, resume=True)
        assert len(traj) == len(Trajectory.read_jsonl(full.results_dir / TRAJECTORY_FILE))
        assert (part.results_dir / TRAJECTORY_FILE).read_bytes() == (full.results_dir / TRAJECTORY_FILE).read_bytes()

    def test_torn_line_and_extra_records_are_dropped(self, make_config):
        full = make_config(run_name="full", generations=6)
        part = make_config(run_name="part", generations=6)
        run(full)
        _killed_run(part, kill_after=2)
        lines = (full.results_dir / TRAJECTORY_FILE).read_text().splitlines(keepends=True)
        # a record written after the checkpoint plus half of the next one
        with open(part.results_dir / TRAJECTORY_FILE, "a") as fh:
            fh.write(lines[3] + lines[4][:40])
        run(part, resume=True)
        assert (part.results_dir / TRAJECTORY_FILE).read_bytes() == (full.results_dir / TRAJECTORY_FILE).read_bytes()

    def test_completed_run_is_noop(self, make_config):
        cfg = make_config(generations=3)
        run(cfg)
        before = (cfg.results_dir / TRAJECTORY_FILE).read_bytes()
        assert len(run(cfg, resume=True)) == 3
        assert (cfg.results_dir / TRAJECTORY_FILE).read_bytes() == before

    def test_completed_flag_after_full_budget(self, make_config):
        run(make_config(run_name="short", generations=3))
        ckpt = load_checkpoint(make_config(run_name="short").results_dir)
        assert ckpt["completed"]

    def test_missing_or_corrupt_checkpoint(self, make_config):
        cfg = make_config()
        with pytest.raises(CheckpointError):
            run(cfg, resume=True)
        cfg.results_dir.mkdir(parents=True)
        (cfg.results_dir / CHECKPOINT_FILE).write_text("{not json")
        with pytest.raises(CheckpointError):
            run(cfg, resume=True)

    def test_seed_mismatch(self, make_config):
        cfg = make_config(generations=4)
        _killed_run(cfg, kill_after=1)
        cfg.seed = 99
        with pytest.raises(CheckpointError, match="seed"):
            run(cfg, resume=True)

    def test_checkpoint_fields(self, make_config):
        cfg = make_config(generations=2)
        run(cfg)
        ckpt = json.loads((cfg.results_dir / CHECKPOINT_FILE).read_text())
        assert ckpt["generation"] == 1 and ckpt["completed"] and ckpt["rng"]["seed"] == cfg.seed
        assert ckpt["optimizer"]["optimizer"] == "ga" and len(ckpt["population"]) == cfg.population_size
