"""Population of independent simulated-annealing chains sharing one temperature."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .base import EvaluatedPopulation, Optimizer, to_list


def acceptance_probability(delta: np.ndarray | float, temperature: float) -> np.ndarray:
    """Metropolis probability for a fitness change ``delta`` under maximization."""
    delta = np.asarray(delta, dtype=float)
    with np.errstate(over="ignore", divide="ignore"):
        return np.where(delta >= 0, 1.0, np.exp(np.minimum(delta, 0.0) / temperature))


def metropolis_accept(delta, temperature: float, rng: np.random.Generator) -> np.ndarray:
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    return rng.random(delta.shape) < acceptance_probability(delta, temperature)


class SimulatedAnnealing(Optimizer):
    """Each individual is one chain; proposals are Gaussian with scale ``step_size * T * range``."""

    name = "sa"

    @dataclass
    class Parameters:
        initial_temperature: float = 1.0
        cooling_rate: float = 0.98
        step_size: float = 0.1

    def validate(self):
        p = self.params
        if not 0.0 < p.cooling_rate <= 1.0:
            raise ConfigurationError("cooling_rate must lie in (0, 1]")
        if p.initial_temperature <= 0:
            raise ConfigurationError("temperature must be positive")
        if p.step_size <= 0:
            raise ConfigurationError("step_size must be positive")
        self.temperature = p.initial_temperature
        self.current = None
        self.current_fitness = None

    def _propose(self, rng):
        scale = self.params.step_size * self.temperature * self.bounds.span
        return self.current + scale * rng.normal(size=self.current.shape)

    def initialize(self, create_individual, rng):
        return np.array([create_individual(rng) for _ in range(self.population_size)])

    def step(self, population: EvaluatedPopulation, rng):
        population.require_ok()
        if self.current is None:
            self.current = population.vectors.copy()
            self.current_fitness = population.fitness.copy()
        else:
            accept = metropolis_accept(population.fitness - self.current_fitness, self.temperature, rng)
            self.current[accept] = population.vectors[accept]
            self.current_fitness[accept] = population.fitness[accept]
        self.temperature *= self.params.cooling_rate
        return self._propose(rng)

    def get_state(self):
        return {
            "temperature": self.temperature,
            "cooling_rate": self.params.cooling_rate,
            "current": None if self.current is None else to_list(self.current),
            "current_fitness": None if self.current_fitness is None else to_list(self.current_fitness),
        }

    def set_state(self, state):
        self.temperature = float(state["temperature"])
        self.current = None if state["current"] is None else np.asarray(state["current"], dtype=float)
        cf = state["current_fitness"]
        self.current_fitness = None if cf is None else np.asarray(cf, dtype=float)
