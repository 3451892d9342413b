"""Exhaustive grid search, batched into generations."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ConfigurationError
from .base import EvaluatedPopulation, Optimizer

DEFAULT_CAP = 10**7


def grid_size(axes: Sequence[tuple[float, float, int]]) -> int:
    return math.prod(int(res) for _, _, res in axes)


def axis_values(lower: float, upper: float, resolution: int) -> np.ndarray:
    if resolution < 1:
        raise ConfigurationError("grid resolution must be >= 1")
    if resolution == 1:
        return np.array([float(lower)])
    return np.linspace(lower, upper, int(resolution))


def grid_search_plan(axes: Sequence[tuple[float, float, int]], cap: int = DEFAULT_CAP) -> np.ndarray:
    """All grid points, first axis varying slowest, as an N x len(axes) array."""
    count = grid_size(axes)
    if count > cap:
        raise ConfigurationError(f"grid has {count} points, more than the cap of {cap}")
    values = [axis_values(lo, hi, res) for lo, hi, res in axes]
    return np.array(list(itertools.product(*values)), dtype=float).reshape(count, len(axes))


class GridSearch(Optimizer):
    """Evaluates the grid in chunks of ``population_size``; the batch after the last point is empty.

    ``axes`` maps a parameter name to ``[lower, upper, resolution]`` (applied to
    every component of a vector parameter); undeclared parameters span their
    bounds at ``resolution`` points.
    """

    name = "grid"

    @dataclass
    class Parameters:
        resolution: int = 10
        axes: dict = field(default_factory=dict)
        cap: int = DEFAULT_CAP

    def validate(self):
        unknown = set(self.params.axes) - set(self.bounds.names)
        if unknown:
            raise ConfigurationError(f"grid axes for unknown parameters: {sorted(unknown)}")
        self.axes = []
        for name, spec in self.bounds.items():
            if name in self.params.axes:
                lo, hi, res = self.params.axes[name]
                self.axes.extend([(float(lo), float(hi), int(res))] * spec.dim)
            else:
                self.axes.extend((float(lo), float(hi), int(self.params.resolution))
                                 for lo, hi in zip(spec.lower, spec.upper))
        for _, _, res in self.axes:
            if res < 1:
                raise ConfigurationError("grid resolution must be >= 1")
        self.total = grid_size(self.axes)
        if self.total > self.params.cap:
            raise ConfigurationError(f"grid has {self.total} points, more than the cap of {self.params.cap}")
        self.cursor = 0
        self._points = None

    @property
    def points(self) -> np.ndarray:
        if self._points is None:
            self._points = grid_search_plan(self.axes, self.params.cap)
        return self._points

    def _next_batch(self):
        batch = self.points[self.cursor:self.cursor + self.population_size]
        self.cursor += len(batch)
        return batch

    def initialize(self, create_individual, rng):
        self.cursor = 0
        return self._next_batch()

    def step(self, population: EvaluatedPopulation, rng):
        return self._next_batch()

    def get_state(self):
        return {"axes": [list(a) for a in self.axes], "cursor": self.cursor}

    def set_state(self, state):
        if [tuple(a) for a in state["axes"]] != [tuple(a) for a in self.axes]:
            raise ConfigurationError("checkpointed grid axes differ from the configured ones")
        self.cursor = int(state["cursor"])
