"""Evolution strategies with a rank-shaped finite-difference search gradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from ..errors import ConfigurationError
from .base import EvaluatedPopulation, Optimizer, to_list


def centered_ranks(fitness: np.ndarray) -> np.ndarray:
    """Ranks mapped onto [-0.5, 0.5]; tied fitnesses share their average rank."""
    fitness = np.asarray(fitness, dtype=float)
    if fitness.size < 2:
        return np.zeros_like(fitness)
    return (rankdata(fitness, method="average") - 1.0) / (fitness.size - 1) - 0.5


def es_update(mean: np.ndarray, noise: np.ndarray, fitness: np.ndarray, sigma: float, learning_rate: float):
    """``mean + learning_rate / (J * sigma) * sum_j shaped_j * noise_j``."""
    shaped = centered_ranks(fitness)
    return mean + learning_rate / (len(shaped) * sigma) * (shaped @ noise)


class EvolutionStrategies(Optimizer):
    name = "es"

    @dataclass
    class Parameters:
        sigma: float = 0.1
        learning_rate: float = 0.01
        mirrored_sampling: bool = True

    def validate(self):
        if self.params.sigma <= 0:
            raise ConfigurationError("sigma must be positive")
        if self.params.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        self.mean = None
        self.noise = None

    def _sample(self, rng):
        J, D = self.population_size, self.bounds.dimension
        if self.params.mirrored_sampling and J % 2 == 0:
            half = rng.normal(size=(J // 2, D))
            self.noise = np.vstack([half, -half])
        else:
            self.noise = rng.normal(size=(J, D))
        return self.mean + self.params.sigma * self.noise

    def initialize(self, create_individual, rng):
        self.mean = np.asarray(create_individual(rng), dtype=float)
        return self._sample(rng)

    def step(self, population: EvaluatedPopulation, rng):
        population.require_ok()
        self.mean = es_update(self.mean, self.noise, population.fitness, self.params.sigma, self.params.learning_rate)
        self.mean = self.bounds.clip_vector(self.mean)
        return self._sample(rng)

    def get_state(self):
        return {
            "mean": None if self.mean is None else to_list(self.mean),
            "sigma": self.params.sigma,
            "learning_rate": self.params.learning_rate,
            "noise": None if self.noise is None else to_list(self.noise),
        }

    def set_state(self, state):
        self.mean = None if state["mean"] is None else np.asarray(state["mean"], dtype=float)
        self.noise = None if state["noise"] is None else np.asarray(state["noise"], dtype=float)
