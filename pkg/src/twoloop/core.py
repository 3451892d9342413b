"""Individuals, bounds, fitness weighting and the trajectory record."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, EmptyTrajectoryError, EvaluationError

logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_FAILED = "failed"
STATUS_TIMEOUT = "timeout"
STATUSES = (STATUS_OK, STATUS_FAILED, STATUS_TIMEOUT)

# spawn-key prefixes for the counter-based RNG split
STREAM_INIT = 0
STREAM_STEP = 1
STREAM_EVAL = 2


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``key`` under the master ``seed``.

    Streams are addressed by counters (generation, index, ...) instead of being
    drawn sequentially, so evaluation order and resumption cannot change them.
    """
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


@dataclass(frozen=True)
class ParameterBounds:
    lower: np.ndarray
    upper: np.ndarray
    integer: bool = False

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ConfigurationError(f"lower {lower.shape} and upper {upper.shape} bounds must be equal-length vectors")
        if np.any(lower > upper):
            raise ConfigurationError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "integer", bool(self.integer))

    @property
    def dim(self) -> int:
        return self.lower.size


class Bounds:
    """Ordered per-parameter box constraints; also the layout of the flat search vector.

    Optimizers work on flat vectors of length :attr:`dimension`; parameters are
    laid out in declaration order, each occupying ``dim`` consecutive slots.
    """

    def __init__(self, parameters: Mapping[str, ParameterBounds | Sequence]):
        self._params: dict[str, ParameterBounds] = {}
        for name, spec in parameters.items():
            if not isinstance(spec, ParameterBounds):
                spec = ParameterBounds(*spec)
            self._params[str(name)] = spec
        if not self._params:
            raise ConfigurationError("bounds declare no parameters")
        self.lower = np.concatenate([p.lower for p in self._params.values()])
        self.upper = np.concatenate([p.upper for p in self._params.values()])
        self.integer_mask = np.concatenate([np.full(p.dim, p.integer) for p in self._params.values()])

    def __getitem__(self, name: str) -> ParameterBounds:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __eq__(self, other):
        if not isinstance(other, Bounds):
            return NotImplemented
        return self.to_json() == other.to_json()

    @property
    def names(self) -> list[str]:
        return list(self._params)

    @property
    def dims(self) -> list[int]:
        return [p.dim for p in self._params.values()]

    @property
    def dimension(self) -> int:
        return int(self.lower.size)

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def items(self):
        return self._params.items()

    def flatten(self, params: Mapping[str, Any] | "Individual") -> np.ndarray:
        if isinstance(params, Individual):
            params = params.as_dict()
        unknown = set(params) - set(self._params)
        if unknown:
            raise ConfigurationError(f"parameters without bounds: {sorted(unknown)}")
        parts = []
        for name, spec in self._params.items():
            if name not in params:
                raise ConfigurationError(f"missing parameter {name!r}")
            value = np.atleast_1d(np.asarray(params[name], dtype=float))
            if value.shape != (spec.dim,):
                raise ConfigurationError(f"parameter {name!r} has shape {value.shape}, expected ({spec.dim},)")
            parts.append(value)
        return np.concatenate(parts)

    def unflatten(self, vector: Sequence[float]) -> dict[str, np.ndarray]:
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.dimension,):
            raise ConfigurationError(f"vector has shape {vector.shape}, expected ({self.dimension},)")
        out, start = {}, 0
        for name, spec in self._params.items():
            out[name] = vector[start:start + spec.dim].copy()
            start += spec.dim
        return out

    def clip_vector(self, vector: Sequence[float]) -> np.ndarray:
        clipped = np.clip(np.asarray(vector, dtype=float), self.lower, self.upper)
        if self.integer_mask.any():
            clipped = np.where(self.integer_mask, round_half_away(clipped), clipped)
        return clipped

    def normalize(self, vectors: np.ndarray) -> np.ndarray:
        """Affine map of the box onto [0, 1]; zero-width dimensions map to 0."""
        span = np.where(self.span > 0, self.span, 1.0)
        return (np.asarray(vectors, dtype=float) - self.lower) / span

    def denormalize(self, vectors: np.ndarray) -> np.ndarray:
        span = np.where(self.span > 0, self.span, 1.0)
        return np.asarray(vectors, dtype=float) * span + self.lower

    def uniform(self, rng: np.random.Generator) -> np.ndarray:
        return self.clip_vector(rng.uniform(self.lower, self.upper))

    def to_json(self) -> dict:
        return {
            name: {"lower": p.lower.tolist(), "upper": p.upper.tolist(), "integer": p.integer}
            for name, p in self._params.items()
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Mapping]) -> "Bounds":
        return cls({
            name: ParameterBounds(spec["lower"], spec["upper"], spec.get("integer", False))
            for name, spec in data.items()
        })

    def __repr__(self):
        return f"Bounds({', '.join(f'{n}[{d}]' for n, d in zip(self.names, self.dims))})"


@dataclass(frozen=True, eq=False)
class Individual:
    """One candidate parameter set: ``params`` is an ordered tuple of (name, vector)."""

    generation: int
    index: int
    params: tuple[tuple[str, np.ndarray], ...]

    def __post_init__(self):
        items = self.params.items() if isinstance(self.params, Mapping) else self.params
        normalized = tuple((str(n), np.atleast_1d(np.asarray(v, dtype=float)).copy()) for n, v in items)
        names = [n for n, _ in normalized]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate parameter names in {names}")
        for _, v in normalized:
            v.setflags(write=False)
        object.__setattr__(self, "params", normalized)

    @classmethod
    def from_vector(cls, generation: int, index: int, vector, bounds: Bounds) -> "Individual":
        return cls(generation, index, tuple(bounds.unflatten(vector).items()))

    def as_dict(self) -> dict[str, np.ndarray]:
        return {n: v.copy() for n, v in self.params}

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.params]

    def vector(self) -> np.ndarray:
        return np.concatenate([v for _, v in self.params])

    def __eq__(self, other):
        if not isinstance(other, Individual):
            return NotImplemented
        return (
            self.generation == other.generation
            and self.index == other.index
            and self.names == other.names
            and all(np.array_equal(a, b) for (_, a), (_, b) in zip(self.params, other.params))
        )

    def to_json(self) -> dict:
        return {n: v.tolist() for n, v in self.params}


def weight_fitness(fitness: Sequence[float], weights: Sequence[float]) -> float:
    """Scalarize a fitness vector as the dot product with the weights."""
    f = np.atleast_1d(np.asarray(fitness, dtype=float))
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if f.shape != w.shape:
        raise ConfigurationError(f"fitness has {f.size} components but {w.size} weights were given")
    if not np.all(np.isfinite(f)):
        raise EvaluationError(f"non-finite fitness {f.tolist()}")
    return math.fsum(float(a) * float(b) for a, b in zip(w, f))


def check_weights(weights: Sequence[float], fitness_length: int) -> np.ndarray:
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if w.size != fitness_length:
        raise ConfigurationError(f"{w.size} fitness weights for a fitness vector of length {fitness_length}")
    if not np.all(np.isfinite(w)):
        raise ConfigurationError("fitness weights must be finite")
    if np.any(w < 0):
        logger.warning("negative fitness weights %s: those objectives are minimized", w.tolist())
    return w


def clip_individual(ind: Individual, bounds: Bounds) -> Individual:
    """Clamp every component into its bounds, then round integer-flagged parameters."""
    for name in ind.names:
        if name not in bounds:
            raise ConfigurationError(f"no bounds for parameter {name!r}")
    clipped = []
    for name, value in ind.params:
        spec = bounds[name]
        if value.shape != spec.lower.shape:
            raise ConfigurationError(f"parameter {name!r} has dimension {value.size}, bounds have {spec.dim}")
        v = np.clip(value, spec.lower, spec.upper)
        if spec.integer:
            v = round_half_away(v)
        clipped.append((name, v))
    return Individual(ind.generation, ind.index, tuple(clipped))


@dataclass(frozen=True, eq=False)
class Entry:
    individual: Individual
    fitness: np.ndarray
    weighted_fitness: float
    status: str = STATUS_OK
    wall_time_s: float | None = None

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    def to_json(self) -> dict:
        return {
            "generation": self.individual.generation,
            "index": self.individual.index,
            "params": self.individual.to_json(),
            "fitness": np.asarray(self.fitness, dtype=float).tolist(),
            "weighted_fitness": float(self.weighted_fitness),
            "status": self.status,
            "wall_time_s": None if self.wall_time_s is None else float(self.wall_time_s),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "Entry":
        ind = Individual(data["generation"], data["index"], tuple(data["params"].items()))
        return cls(ind, np.asarray(data["fitness"], dtype=float), float(data["weighted_fitness"]),
                   data["status"], data.get("wall_time_s"))


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    entries: tuple[Entry, ...]
    optimizer_snapshot: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        indices = [e.individual.index for e in self.entries]
        if indices != sorted(indices):
            raise ValueError("generation entries must be ordered by individual index")

    def to_json_line(self) -> str:
        payload = {
            "generation": self.generation,
            "entries": [e.to_json() for e in self.entries],
            "optimizer_snapshot": self.optimizer_snapshot,
        }
        return json.dumps(payload, separators=(",", ":"), allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, data: Mapping) -> "GenerationRecord":
        return cls(data["generation"], tuple(Entry.from_json(e) for e in data["entries"]),
                   data.get("optimizer_snapshot", {}))

    def ok_fitnesses(self) -> np.ndarray:
        return np.array([e.weighted_fitness for e in self.entries if e.ok], dtype=float)


@dataclass
class Trajectory:
    """Append-only per-generation history of a run."""

    run_name: str
    rng_seed: int
    records: list[GenerationRecord] = field(default_factory=list)

    def append(self, record: GenerationRecord) -> None:
        expected = len(self.records)
        if record.generation != expected:
            raise ValueError(f"expected generation {expected}, got {record.generation}")
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def entries(self) -> Iterable[Entry]:
        for record in self.records:
            yield from record.entries

    @classmethod
    def read_jsonl(cls, path, run_name: str = "", rng_seed: int = 0) -> "Trajectory":
        traj = cls(run_name, rng_seed)
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.endswith("\n"):
                    break  # torn final line from an interrupted write
                traj.append(GenerationRecord.from_json(json.loads(line)))
        return traj


def best_entry(trajectory: Trajectory | Iterable[GenerationRecord]) -> tuple[Individual, np.ndarray, int]:
    """Best ok entry over all generations; ties go to the earlier generation, then lower index."""
    best: Entry | None = None
    best_gen = -1
    records = trajectory.records if isinstance(trajectory, Trajectory) else trajectory
    for record in records:
        for entry in record.entries:
            if entry.ok and (best is None or entry.weighted_fitness > best.weighted_fitness):
                best, best_gen = entry, record.generation
    if best is None:
        raise EmptyTrajectoryError("trajectory contains no successfully evaluated individual")
    return best.individual, best.fitness, best_gen


@dataclass(frozen=True, eq=False)
class Evaluation:
    """What an optimizee's ``simulate`` may return when it has more than a fitness to report.

    ``model_output`` is the observation vector consumed by ensemble Kalman optimizers.
    """

    fitness: np.ndarray
    model_output: np.ndarray | None = None

    @classmethod
    def coerce(cls, value) -> "Evaluation":
        if isinstance(value, Evaluation):
            return value
        return cls(np.atleast_1d(np.asarray(value, dtype=float)))
