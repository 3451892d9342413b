"""Parallel evaluation of a generation, natively or through a file-based subprocess protocol.

External simulators exchange two CSV files per individual:

* ``params.csv`` written before launch, header ``name,index,value``, one row per
  scalar component, values with 17 significant digits;
* ``fitness.csv`` written by the simulator, header ``fitness`` followed by one
  value per fitness component.

The command template may reference ``{params_file}``, ``{fitness_file}``,
``{generation}``, ``{index}`` and ``{work_dir}``.
"""

from __future__ import annotations

import csv
import logging
import multiprocessing
import os
import shlex
import shutil
import signal
import string
import subprocess
import time
import traceback
from collections import deque
from dataclasses import dataclass
from multiprocessing.connection import wait as wait_connections
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .core import (
    STATUS_FAILED,
    STATUS_OK,
    STATUS_TIMEOUT,
    STREAM_EVAL,
    Evaluation,
    Individual,
    substream,
)
from .errors import ConfigurationError, EvaluationError

logger = logging.getLogger(__name__)

PLACEHOLDERS = frozenset({"params_file", "fitness_file", "generation", "index", "work_dir"})
PARAMS_FILENAME = "params.csv"
FITNESS_FILENAME = "fitness.csv"
KILL_GRACE_SECONDS = 5.0
POLL_INTERVAL = 0.002


@dataclass(frozen=True)
class EvaluationTask:
    individual: Individual
    work_dir: Path | None = None
    timeout_seconds: float | None = None
    evaluator_kind: str = "native"
    seed: int = 0

    @property
    def rng(self) -> np.random.Generator:
        return substream(self.seed, STREAM_EVAL, self.individual.generation, self.individual.index)


@dataclass(frozen=True, eq=False)
class TaskResult:
    fitness: np.ndarray
    status: str
    wall_time_s: float
    model_output: np.ndarray | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


def _validate_result(evaluation: Evaluation, fitness_length: int | None) -> Evaluation:
    fitness = np.atleast_1d(np.asarray(evaluation.fitness, dtype=float))
    if fitness.ndim != 1 or (fitness_length is not None and fitness.size != fitness_length):
        raise EvaluationError(f"length mismatch: expected {fitness_length} fitness values, got {fitness.size}")
    if not np.all(np.isfinite(fitness)):
        raise EvaluationError(f"non-finite fitness {fitness.tolist()}")
    output = evaluation.model_output
    if output is not None:
        output = np.asarray(output, dtype=float)
    return Evaluation(fitness, output)


# --- CSV protocol ----------------------------------------------------------------------------

def write_params_file(individual: Individual | Mapping[str, Any], path) -> None:
    params = individual.params if isinstance(individual, Individual) else list(individual.items())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["name", "index", "value"])
        for name, value in params:
            for i, v in enumerate(np.atleast_1d(np.asarray(value, dtype=float))):
                writer.writerow([name, i, "%.17g" % v])


def read_params_file(path) -> dict[str, np.ndarray]:
    values: dict[str, list[tuple[int, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["name", "index", "value"]:
            raise EvaluationError(f"{path}: bad params header {header}")
        for row in reader:
            if row:
                name, index, value = row
                values.setdefault(name, []).append((int(index), float(value)))
    out = {}
    for name, rows in values.items():
        rows.sort()
        if [i for i, _ in rows] != list(range(len(rows))):
            raise EvaluationError(f"{path}: non-contiguous component indices for {name!r}")
        out[name] = np.array([v for _, v in rows])
    return out


def read_fitness_file(path, expected_length: int) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise EvaluationError(f"fitness file {path} was not written")
    lines = [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not lines:
        raise EvaluationError(f"fitness file {path} is empty")
    if lines[0] != "fitness":
        raise EvaluationError(f"fitness file {path}: expected header 'fitness', got {lines[0]!r}")
    rows = lines[1:]
    if len(rows) != expected_length:
        raise EvaluationError(f"fitness file {path}: length mismatch, expected {expected_length} rows, got {len(rows)}")
    try:
        fitness = np.array([float(r) for r in rows])
    except ValueError as exc:
        raise EvaluationError(f"fitness file {path}: unparsable value ({exc})") from None
    if not np.all(np.isfinite(fitness)):
        raise EvaluationError(f"fitness file {path}: non-finite value")
    return fitness


# --- evaluators ------------------------------------------------------------------------------

class NativeEvaluator:
    """In-language evaluation of ``simulate(params, rng)``.

    ``isolation`` is ``"inline"`` (same process, no timeout enforcement),
    ``"process"`` (one forked child per task, killable), or ``"auto"``:
    inline for serial runs without a timeout, processes otherwise.
    """

    kind = "native"

    def __init__(self, simulate: Callable[[dict, np.random.Generator], Any],
                 fitness_length: int | None = None, isolation: str = "auto"):
        if isolation not in ("auto", "inline", "process"):
            raise ConfigurationError(f"unknown isolation mode {isolation!r}")
        self.simulate = simulate
        self.fitness_length = fitness_length
        self.isolation = isolation

    def evaluate(self, task: EvaluationTask) -> Evaluation:
        value = self.simulate(task.individual.as_dict(), task.rng)
        return _validate_result(Evaluation.coerce(value), self.fitness_length)

    def job(self, task: EvaluationTask, max_parallel: int):
        mode = self.isolation
        if mode == "auto":
            mode = "inline" if max_parallel == 1 and task.timeout_seconds is None else "process"
        return _InlineJob(self, task) if mode == "inline" else _ProcessJob(self, task)


@dataclass(frozen=True)
class ExternalCommandSpec:
    command_template: str
    expected_fitness_length: int = 1

    def __post_init__(self):
        if not self.command_template or not self.command_template.strip():
            raise ConfigurationError("external command template is empty")
        if self.expected_fitness_length < 1:
            raise ConfigurationError("expected_fitness_length must be >= 1")
        for token in shlex.split(self.command_template):
            for _, field, spec, conversion in string.Formatter().parse(token):
                if field is None:
                    continue
                if field not in PLACEHOLDERS:
                    raise ConfigurationError(f"unknown placeholder {{{field}}} in command template; "
                                             f"allowed: {sorted(PLACEHOLDERS)}")
                if spec or conversion:
                    raise ConfigurationError(f"placeholder {{{field}}} must not carry a format spec or conversion")

    def render(self, task: EvaluationTask) -> list[str]:
        work_dir = Path(task.work_dir)
        values = {
            "params_file": str(work_dir / PARAMS_FILENAME),
            "fitness_file": str(work_dir / FITNESS_FILENAME),
            "generation": str(task.individual.generation),
            "index": str(task.individual.index),
            "work_dir": str(work_dir),
        }
        return [token.format_map(values) for token in shlex.split(self.command_template)]


class ExternalEvaluator:
    """Launches an external simulator per individual in its own work directory."""

    kind = "external"

    def __init__(self, spec: ExternalCommandSpec, keep_workdirs: bool = False,
                 kill_grace_seconds: float = KILL_GRACE_SECONDS):
        self.spec = spec
        self.keep_workdirs = keep_workdirs
        self.kill_grace_seconds = kill_grace_seconds
        self.fitness_length = spec.expected_fitness_length

    def job(self, task: EvaluationTask, max_parallel: int):
        return _ExternalJob(self, task)


# --- jobs ------------------------------------------------------------------------------------

class _Job:
    def __init__(self, evaluator, task: EvaluationTask):
        self.evaluator = evaluator
        self.task = task
        self.started = None
        self.deadline = None
        self.result: TaskResult | None = None

    def start(self):
        self.started = time.monotonic()
        if self.task.timeout_seconds is not None:
            self.deadline = self.started + self.task.timeout_seconds

    def elapsed(self) -> float:
        return time.monotonic() - self.started

    def finish(self, fitness, status, output=None, message=""):
        self.result = TaskResult(fitness, status, self.elapsed(), output, message)

    def poll(self) -> bool:
        return self.result is not None

    def kill(self):
        pass

    def sentinel(self):
        return None


class _InlineJob(_Job):
    def start(self):
        super().start()
        try:
            evaluation = self.evaluator.evaluate(self.task)
        except Exception as exc:  # a crashing optimizee must not abort the generation
            logger.warning("evaluation of individual %d failed: %s", self.task.individual.index, exc)
            self.finish(None, STATUS_FAILED, message=f"{type(exc).__name__}: {exc}")
        else:
            self.finish(evaluation.fitness, STATUS_OK, evaluation.model_output)


def _child_main(evaluator: NativeEvaluator, task: EvaluationTask, conn):
    try:
        evaluation = evaluator.evaluate(task)
        conn.send(("ok", evaluation.fitness, evaluation.model_output))
    except BaseException as exc:
        conn.send(("error", f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}", None))
    finally:
        conn.close()


def _mp_context():
    try:
        return multiprocessing.get_context("fork")
    except ValueError:
        return multiprocessing.get_context("spawn")


class _ProcessJob(_Job):
    def start(self):
        super().start()
        ctx = _mp_context()
        self.conn, child_conn = ctx.Pipe(duplex=False)
        self.process = ctx.Process(target=_child_main, args=(self.evaluator, self.task, child_conn), daemon=True)
        self.process.start()
        child_conn.close()

    def sentinel(self):
        return self.conn

    def poll(self) -> bool:
        if self.result is not None:
            return True
        if self.conn.poll():
            try:
                kind, payload, output = self.conn.recv()
            except EOFError:
                kind, payload, output = "error", "worker exited without a result", None
            self.process.join()
            if kind == "ok":
                self.finish(payload, STATUS_OK, output)
            else:
                logger.warning("evaluation of individual %d failed: %s",
                               self.task.individual.index, payload.splitlines()[0])
                self.finish(None, STATUS_FAILED, message=payload)
            self.conn.close()
            return True
        if not self.process.is_alive():
            if self.conn.poll():
                return self.poll()
            self.finish(None, STATUS_FAILED, message=f"worker died with exit code {self.process.exitcode}")
            self.conn.close()
            return True
        return False

    def kill(self):
        self.process.terminate()
        self.process.join(KILL_GRACE_SECONDS)
        if self.process.is_alive():
            self.process.kill()
            self.process.join()
        self.conn.close()


class _ExternalJob(_Job):
    def start(self):
        super().start()
        spec = self.evaluator.spec
        work_dir = Path(self.task.work_dir)
        self.proc = None
        try:
            work_dir.mkdir(parents=True, exist_ok=True)
            fitness_file = work_dir / FITNESS_FILENAME
            if fitness_file.exists():
                fitness_file.unlink()
            write_params_file(self.task.individual, work_dir / PARAMS_FILENAME)
            argv = spec.render(self.task)
            self.stdout = open(work_dir / "stdout.log", "wb")
            self.stderr = open(work_dir / "stderr.log", "wb")
            self.proc = subprocess.Popen(argv, cwd=work_dir, stdout=self.stdout, stderr=self.stderr,
                                         stdin=subprocess.DEVNULL, start_new_session=(os.name == "posix"))
        except (OSError, ValueError) as exc:
            self._close_logs()
            self.finish(None, STATUS_FAILED, message=f"could not launch external command: {exc}")

    def _close_logs(self):
        for fh in (getattr(self, "stdout", None), getattr(self, "stderr", None)):
            if fh is not None and not fh.closed:
                fh.close()

    def poll(self) -> bool:
        if self.result is not None:
            return True
        code = self.proc.poll()
        if code is None:
            return False
        self._close_logs()
        if code != 0:
            self.finish(None, STATUS_FAILED, message=f"external command exited with code {code}")
            return True
        try:
            fitness = read_fitness_file(Path(self.task.work_dir) / FITNESS_FILENAME, self.evaluator.fitness_length)
        except EvaluationError as exc:
            self.finish(None, STATUS_FAILED, message=str(exc))
            return True
        self.finish(fitness, STATUS_OK)
        if not self.evaluator.keep_workdirs:
            shutil.rmtree(self.task.work_dir, ignore_errors=True)
        return True

    def _signal(self, sig):
        try:
            if os.name == "posix":
                os.killpg(self.proc.pid, sig)
            else:
                self.proc.send_signal(sig)
        except ProcessLookupError:
            pass

    def kill(self):
        if self.proc is None:
            return
        self._signal(signal.SIGTERM)
        try:
            self.proc.wait(self.evaluator.kill_grace_seconds)
        except subprocess.TimeoutExpired:
            self._signal(getattr(signal, "SIGKILL", signal.SIGTERM))
            self.proc.wait()
        self._close_logs()


# --- dispatch --------------------------------------------------------------------------------

def evaluate_generation(tasks: Sequence[EvaluationTask], evaluator, max_parallel: int = 1,
                        worst_fitness: float = 0.0) -> list[TaskResult]:
    """Evaluate all tasks with at most ``max_parallel`` in flight; results follow task order.

    Timed-out and failed tasks report ``worst_fitness`` in every fitness
    component. Returns only once every task has finished or been killed.
    """
    if max_parallel < 1:
        raise ConfigurationError("max_parallel must be >= 1")
    work_dirs = [t.work_dir for t in tasks if t.work_dir is not None]
    if len(set(map(str, work_dirs))) != len(work_dirs):
        raise ConfigurationError("evaluation tasks must not share a work directory")
    length = getattr(evaluator, "fitness_length", None) or 1
    results: list[TaskResult | None] = [None] * len(tasks)
    pending = deque(enumerate(tasks))
    running: dict[int, _Job] = {}

    def settle(i, job):
        r = job.result
        if r.status != STATUS_OK:
            r = TaskResult(np.full(length, float(worst_fitness)), r.status, r.wall_time_s, None, r.message)
        results[i] = r

    while pending or running:
        while pending and len(running) < max_parallel:
            i, task = pending.popleft()
            job = evaluator.job(task, max_parallel)
            job.start()
            running[i] = job
        progressed = False
        for i, job in list(running.items()):
            if job.poll():
                settle(i, running.pop(i))
                progressed = True
            elif job.deadline is not None and time.monotonic() >= job.deadline:
                job.kill()
                job.finish(None, STATUS_TIMEOUT, message=f"timed out after {job.task.timeout_seconds} s")
                logger.warning("individual %d timed out", job.task.individual.index)
                settle(i, running.pop(i))
                progressed = True
        if running and not progressed:
            sentinels = [s for s in (j.sentinel() for j in running.values()) if s is not None]
            now = time.monotonic()
            deadlines = [j.deadline - now for j in running.values() if j.deadline is not None]
            timeout = min([POLL_INTERVAL * 25] + [max(d, 0.0) for d in deadlines])
            if sentinels and len(sentinels) == len(running):
                wait_connections(sentinels, timeout=timeout)
            else:
                time.sleep(min(POLL_INTERVAL, timeout))
    return results


def run_external(spec: ExternalCommandSpec, task: EvaluationTask, keep_workdirs: bool = False,
                 worst_fitness: float = 0.0) -> TaskResult:
    """Evaluate one task through the external command protocol."""
    return evaluate_generation([task], ExternalEvaluator(spec, keep_workdirs), 1, worst_fitness)[0]
