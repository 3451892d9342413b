"""The two-loop engine: optimizee contract, generation loop, checkpointing and resumption.

Results of a run live in ``<results_root>/<run_name>/``:

``trajectory.jsonl``
    one :class:`~twoloop.core.GenerationRecord` per line, append-only.
``checkpoint.json``
    last completed generation, RNG position, optimizer snapshot and the
    population to evaluate next; replaced atomically after every generation.
``timings.jsonl``
    measured wall times per generation (kept out of the trajectory unless
    ``record_wall_time`` is set, so trajectories stay byte-reproducible).
``summary.json``
    best individual and fitness once the run completes.
"""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Callable

import numpy as np

from .core import (
    STATUS_OK,
    STREAM_INIT,
    STREAM_STEP,
    Bounds,
    Entry,
    GenerationRecord,
    Individual,
    Trajectory,
    best_entry,
    check_weights,
    clip_individual,
    substream,
    weight_fitness,
)
from .errors import CheckpointError, ConfigurationError
from .optimizers.base import EvaluatedPopulation, Optimizer
from .runner import EvaluationTask, ExternalEvaluator, NativeEvaluator, evaluate_generation

logger = logging.getLogger(__name__)

TRAJECTORY_FILE = "trajectory.jsonl"
CHECKPOINT_FILE = "checkpoint.json"
TIMINGS_FILE = "timings.jsonl"
SUMMARY_FILE = "summary.json"
CONFIG_FILE = "config.json"
CHECKPOINT_VERSION = 1


class Optimizee:
    """Inner-loop program under optimization.

    Subclasses set :attr:`bounds` and :attr:`fitness_length` and implement
    :meth:`simulate`. ``simulate`` returns a fitness (scalar or vector) or an
    :class:`~twoloop.core.Evaluation` carrying a model output as well.
    """

    bounds: Bounds
    fitness_length: int = 1

    def create_individual(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        """Random initial parameters, uniform within the bounds by default."""
        return self.bounds.unflatten(self.bounds.uniform(rng))

    def bounding_func(self, params: dict) -> dict:
        ind = clip_individual(Individual(0, 0, tuple(params.items())), self.bounds)
        return ind.as_dict()

    def simulate(self, params: dict, rng: np.random.Generator):
        raise NotImplementedError


def _atomic_write_json(path: Path, payload) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, allow_nan=False)
        fh.write("\n")
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _append_line(path: Path, line: str) -> None:
    fd = os.open(path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
    try:
        os.write(fd, line.encode("utf-8"))
        os.fsync(fd)
    finally:
        os.close(fd)


def load_checkpoint(results_dir) -> dict:
    path = Path(results_dir) / CHECKPOINT_FILE
    try:
        with open(path, encoding="utf-8") as fh:
            ckpt = json.load(fh)
    except FileNotFoundError:
        raise CheckpointError(f"no checkpoint at {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from None
    required = {"version", "run_name", "generation", "completed", "rng", "optimizer", "population"}
    if not isinstance(ckpt, dict) or not required <= set(ckpt):
        raise CheckpointError(f"checkpoint {path} lacks fields {sorted(required - set(ckpt or {}))}")
    if ckpt["version"] != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {ckpt['version']}")
    return ckpt


def _truncate_jsonl(path: Path, keep_generations: int) -> None:
    """Drop records beyond ``keep_generations`` and any torn trailing line."""
    if not path.exists():
        return
    kept = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.endswith("\n"):
                break
            if json.loads(line)["generation"] < keep_generations:
                kept.append(line)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.writelines(kept)
    os.replace(tmp, path)


def write_summary(results_dir, trajectory: Trajectory) -> dict:
    ind, fitness, generation = best_entry(trajectory)
    weighted = next(e.weighted_fitness for e in trajectory.records[generation].entries
                    if e.individual.index == ind.index)
    summary = {
        "run_name": trajectory.run_name,
        "best_individual": ind.to_json(),
        "best_fitness": weighted,
        "best_fitness_vector": np.asarray(fitness).tolist(),
        "best_generation": generation,
        "best_index": ind.index,
        "generations_executed": len(trajectory),
    }
    _atomic_write_json(Path(results_dir) / SUMMARY_FILE, summary)
    return summary


def make_evaluator(config, optimizee):
    if getattr(config, "external", None):
        from .runner import ExternalCommandSpec
        ext = config.external
        spec = ext if isinstance(ext, ExternalCommandSpec) else ExternalCommandSpec(
            ext["command"], int(ext.get("expected_fitness_length", optimizee.fitness_length)))
        return ExternalEvaluator(spec, keep_workdirs=config.keep_workdirs)
    return NativeEvaluator(optimizee.simulate, optimizee.fitness_length, getattr(config, "isolation", "auto"))


def run_generation_loop(config, optimizee: Optimizee, optimizer: Optimizer, evaluator=None, *,
                        resume: bool = False,
                        on_generation: Callable[[GenerationRecord], None] | None = None) -> Trajectory:
    """Alternate evaluation and optimizer steps for ``config.generations`` generations.

    Each generation is clipped, evaluated, handed to the optimizer, appended
    to the trajectory and checkpointed, in that order. With ``resume`` the
    loop picks up after the last checkpointed generation.
    """
    if config.population_size < 1 or config.generations < 1:
        raise ConfigurationError("population_size and generations must both be >= 1")
    results_dir = Path(config.results_root) / config.run_name
    traj_path = results_dir / TRAJECTORY_FILE
    ckpt_path = results_dir / CHECKPOINT_FILE
    timings_path = results_dir / TIMINGS_FILE
    bounds = optimizee.bounds
    weights = check_weights(config.fitness_weights or [1.0] * optimizee.fitness_length, optimizee.fitness_length)
    worst = float(config.worst_fitness)
    optimizer.bind(optimizee)
    if evaluator is None:
        evaluator = make_evaluator(config, optimizee)

    if resume:
        ckpt = load_checkpoint(results_dir)
        if ckpt["rng"]["seed"] != config.seed:
            raise CheckpointError(f"checkpoint seed {ckpt['rng']['seed']} differs from configured seed {config.seed}")
        done = int(ckpt["generation"]) + 1
        _truncate_jsonl(traj_path, done)
        _truncate_jsonl(timings_path, done)
        trajectory = Trajectory.read_jsonl(traj_path, config.run_name, config.seed) if traj_path.exists() \
            else Trajectory(config.run_name, config.seed)
        if len(trajectory) != done:
            raise CheckpointError(f"trajectory holds {len(trajectory)} generations, checkpoint expects {done}")
        if ckpt["completed"]:
            logger.info("run %s already completed after %d generations", config.run_name, done)
            return trajectory
        optimizer.set_state(ckpt["optimizer"]["state"])
        population = np.asarray(ckpt["population"], dtype=float).reshape(-1, bounds.dimension)
        generation = done
    else:
        results_dir.mkdir(parents=True, exist_ok=True)
        for path in (traj_path, ckpt_path, timings_path, results_dir / SUMMARY_FILE):
            if path.exists():
                path.unlink()
        trajectory = Trajectory(config.run_name, config.seed)

        def create(rng):
            return bounds.flatten(optimizee.bounding_func(optimizee.create_individual(rng)))

        population = optimizer.initialize(create, substream(config.seed, STREAM_INIT))
        generation = 0

    warned_worst = False
    while generation < config.generations and len(population) > 0:
        individuals = [
            clip_individual(Individual.from_vector(generation, i, v, bounds), bounds)
            for i, v in enumerate(population)
        ]
        tasks = [
            EvaluationTask(
                ind,
                results_dir / "work" / f"gen_{generation:05d}" / f"ind_{ind.index:05d}"
                if evaluator.kind == "external" else None,
                config.timeout_seconds, evaluator.kind, config.seed)
            for ind in individuals
        ]
        results = evaluate_generation(tasks, evaluator, config.max_parallel, worst)

        entries, fitness, outputs = [], [], []
        for ind, res in zip(individuals, results):
            weighted = weight_fitness(res.fitness, weights) if res.ok else worst
            if res.ok and weighted < worst and not warned_worst:
                logger.warning("observed fitness %g is below worst_fitness %g; failed evaluations "
                               "would outrank it", weighted, worst)
                warned_worst = True
            entries.append(Entry(ind, res.fitness, weighted, res.status,
                                 res.wall_time_s if config.record_wall_time else None))
            fitness.append(weighted)
            outputs.append(res.model_output)

        evaluated = EvaluatedPopulation(
            np.array([ind.vector() for ind in individuals]), np.array(fitness),
            [e.status for e in entries], outputs, np.array([e.fitness for e in entries]))
        next_population = np.asarray(
            optimizer.step(evaluated, substream(config.seed, STREAM_STEP, generation)), dtype=float)

        record = GenerationRecord(generation, tuple(entries), optimizer.snapshot())
        _append_line(traj_path, record.to_json_line())
        trajectory.append(record)
        _append_line(timings_path, json.dumps(
            {"generation": generation, "wall_time_s": [r.wall_time_s for r in results]}) + "\n")

        completed = (generation + 1 >= config.generations or optimizer.converged()
                     or len(next_population) == 0)
        _atomic_write_json(ckpt_path, {
            "version": CHECKPOINT_VERSION,
            "run_name": config.run_name,
            "generation": generation,
            "completed": completed,
            "rng": {"seed": config.seed, "next_generation": generation + 1},
            "optimizer": optimizer.snapshot(),
            "population": next_population.tolist(),
        })
        n_ok = sum(e.status == STATUS_OK for e in entries)
        logger.info("generation %d: best %.6g, %d/%d ok", generation,
                    max(fitness) if fitness else float("nan"), n_ok, len(entries))
        if on_generation is not None:
            on_generation(record)
        population = next_population
        generation += 1
        if completed:
            break

    if any(e.ok for e in trajectory.entries()):
        write_summary(results_dir, trajectory)
    return trajectory
