"""Cross-entropy method with a diagonal Gaussian search distribution."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .base import EvaluatedPopulation, Optimizer, to_list


def fit_elites(vectors: np.ndarray, fitness: np.ndarray, elite_fraction: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean and (population) standard deviation of the top ``ceil(elite_fraction * J)`` rows."""
    n = max(1, math.ceil(elite_fraction * len(fitness)))
    order = np.lexsort((np.arange(len(fitness)), -np.asarray(fitness, dtype=float)))
    elites = np.asarray(vectors, dtype=float)[order[:n]]
    return elites.mean(axis=0), elites.std(axis=0)


class CrossEntropy(Optimizer):
    """Refit a diagonal Gaussian to the elites each generation.

    A decaying extra variance term keeps the distribution from collapsing
    before the mean has settled (noisy cross-entropy).
    """

    name = "ce"

    @dataclass
    class Parameters:
        elite_fraction: float = 0.2
        smoothing: float = 0.2  # weight kept on the previous mean and sigma
        initial_sigma: float = 0.25  # fraction of the bound range
        sigma_floor: float = 1e-8  # fraction of the bound range
        extra_noise: float = 0.02  # fraction of the bound range, added in quadrature to the fitted sigma
        noise_decay: float = 0.95  # per-generation decay of extra_noise

    def validate(self):
        p = self.params
        if not 0.0 < p.elite_fraction <= 1.0:
            raise ConfigurationError("elite_fraction must lie in (0, 1]")
        if not 0.0 <= p.smoothing < 1.0:
            raise ConfigurationError("smoothing must lie in [0, 1)")
        if p.initial_sigma <= 0 or p.sigma_floor < 0 or p.extra_noise < 0:
            raise ConfigurationError("initial_sigma must be positive, sigma_floor and extra_noise non-negative")
        if not 0.0 <= p.noise_decay <= 1.0:
            raise ConfigurationError("noise_decay must lie in [0, 1]")
        self.mean = None
        self.sigma = None
        self.generation = 0

    def _sample(self, rng):
        return self.mean + self.sigma * rng.normal(size=(self.population_size, self.bounds.dimension))

    def initialize(self, create_individual, rng):
        self.mean = np.asarray(create_individual(rng), dtype=float)
        self.sigma = self.params.initial_sigma * self.bounds.span
        return self._sample(rng)

    def step(self, population: EvaluatedPopulation, rng):
        population.require_ok()
        p = self.params
        ok = population.ok_mask
        mean, sigma = fit_elites(population.vectors[ok], population.fitness[ok], p.elite_fraction)
        self.mean = (1.0 - p.smoothing) * mean + p.smoothing * self.mean
        self.sigma = (1.0 - p.smoothing) * sigma + p.smoothing * self.sigma
        extra = p.extra_noise * p.noise_decay**self.generation * self.bounds.span
        self.sigma = np.maximum(np.sqrt(self.sigma**2 + extra**2), p.sigma_floor * self.bounds.span)
        self.generation += 1
        return self._sample(rng)

    def get_state(self):
        return {
            "mean": None if self.mean is None else to_list(self.mean),
            "sigma": None if self.sigma is None else to_list(self.sigma),
            "elite_fraction": self.params.elite_fraction,
            "generation": self.generation,
        }

    def set_state(self, state):
        self.mean = None if state["mean"] is None else np.asarray(state["mean"], dtype=float)
        self.sigma = None if state["sigma"] is None else np.asarray(state["sigma"], dtype=float)
        self.generation = int(state["generation"])
