"""Common optimizer machinery: the evaluated population and the outer-loop contract."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from ..core import STATUS_OK, Bounds
from ..errors import ConfigurationError, OptimizerStepError


@dataclass
class EvaluatedPopulation:
    """A generation after evaluation, in flat-vector form.

    ``vectors`` is J x D, ``fitness`` holds the weighted fitness of every
    individual (failed ones carry the run's worst fitness), and
    ``model_outputs`` optionally holds one observation vector per individual.
    """

    vectors: np.ndarray
    fitness: np.ndarray
    status: Sequence[str] | None = None
    model_outputs: Sequence[np.ndarray | None] | None = None
    fitness_vectors: np.ndarray | None = None

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        self.fitness = np.asarray(self.fitness, dtype=float).reshape(-1)
        if self.status is None:
            self.status = [STATUS_OK] * len(self.fitness)
        if len(self.vectors) != len(self.fitness) or len(self.status) != len(self.fitness):
            raise ValueError("vectors, fitness and status must have one row per individual")

    def __len__(self) -> int:
        return len(self.fitness)

    @property
    def ok_mask(self) -> np.ndarray:
        return np.array([s == STATUS_OK for s in self.status], dtype=bool)

    def require_ok(self) -> None:
        if not self.ok_mask.any():
            raise OptimizerStepError("no individual of the generation was evaluated successfully")

    def ranking(self) -> np.ndarray:
        """Indices from best to worst; equal fitness ranks the lower index first."""
        return np.lexsort((np.arange(len(self)), -self.fitness))


def to_list(a) -> Any:
    return np.asarray(a, dtype=float).tolist()


class Optimizer:
    """Outer-loop algorithm.

    Subclasses define a ``Parameters`` dataclass (the config block) and
    implement :meth:`initialize`, :meth:`step`, :meth:`get_state` and
    :meth:`set_state`. All populations are J x D arrays of flat parameter
    vectors laid out by :class:`~twoloop.core.Bounds`; clipping is applied by
    the engine, not here.
    """

    name = "optimizer"

    @dataclass
    class Parameters:
        pass

    def __init__(self, bounds: Bounds, population_size: int, parameters=None, **kwargs):
        if population_size < 1:
            raise ConfigurationError("population size must be at least 1")
        self.bounds = bounds
        self.population_size = int(population_size)
        self.params = self.make_parameters(parameters, **kwargs)
        self.validate()

    @classmethod
    def make_parameters(cls, parameters=None, **kwargs):
        if isinstance(parameters, cls.Parameters):
            return dataclasses.replace(parameters, **kwargs)
        block = dict(parameters or {})
        block.update(kwargs)
        known = {f.name for f in dataclasses.fields(cls.Parameters)}
        unknown = set(block) - known
        if unknown:
            raise ConfigurationError(f"unknown {cls.name} parameters: {sorted(unknown)} (known: {sorted(known)})")
        return cls.Parameters(**block)

    def validate(self) -> None:
        pass

    def bind(self, optimizee) -> None:
        """Hook for optimizers that need more than bounds from the optimizee."""

    def initialize(self, create_individual: Callable[[np.random.Generator], np.ndarray],
                   rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def step(self, population: EvaluatedPopulation, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def converged(self) -> bool:
        """Queried after ``step``; True means the population just returned is not evaluated."""
        return False

    def get_state(self) -> dict:
        raise NotImplementedError

    def set_state(self, state: Mapping) -> None:
        raise NotImplementedError

    def snapshot(self) -> dict:
        return {"optimizer": self.name, "state": self.get_state()}
