"""Genetic algorithm with tournament selection, blend crossover, Gaussian mutation and a hall of fame."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .base import EvaluatedPopulation, Optimizer, to_list


def tournament_select(fitness: np.ndarray, k: int, tournament_size: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``k`` tournament winners; contestants drawn with replacement, lower index wins ties."""
    contestants = rng.integers(0, len(fitness), size=(k, tournament_size))
    winners = np.empty(k, dtype=int)
    for row, c in enumerate(contestants):
        best = c[0]
        for i in c[1:]:
            if fitness[i] > fitness[best] or (fitness[i] == fitness[best] and i < best):
                best = i
        winners[row] = best
    return winners


def blend_crossover(a: np.ndarray, b: np.ndarray, alpha: float, rng: np.random.Generator):
    gamma = (1.0 + 2.0 * alpha) * rng.random(a.shape) - alpha
    return (1.0 - gamma) * a + gamma * b, gamma * a + (1.0 - gamma) * b


class HallOfFame:
    """Best-ever distinct individuals, best first; older entries win ties."""

    def __init__(self, size: int, members=None):
        self.size = size
        self.members: list[tuple[np.ndarray, float]] = list(members or [])

    def update(self, vectors: np.ndarray, fitness: np.ndarray) -> None:
        pool = list(self.members)
        for v, f in zip(vectors, fitness):
            if not any(np.array_equal(v, m) for m, _ in pool):
                pool.append((np.array(v, dtype=float), float(f)))
        order = sorted(range(len(pool)), key=lambda i: (-pool[i][1], i))
        self.members = [pool[i] for i in order[: self.size]]

    def best_fitness(self) -> float:
        return self.members[0][1] if self.members else -np.inf

    def to_json(self) -> list:
        return [{"vector": to_list(v), "fitness": f} for v, f in self.members]

    @classmethod
    def from_json(cls, size: int, data) -> "HallOfFame":
        return cls(size, [(np.asarray(m["vector"], dtype=float), float(m["fitness"])) for m in data])


class GeneticAlgorithm(Optimizer):
    """Generational GA; the hall of fame is reinjected into each new generation (elitism).

    Each offspring slot remembers the fitness of the parent selected for it.
    Since offspring are unevaluated when elites are reinjected, the slots with
    the lowest parent fitness count as the worst offspring and are replaced.
    """

    name = "ga"

    @dataclass
    class Parameters:
        tournament_size: int = 3
        blend_alpha: float = 0.5
        crossover_prob: float = 0.7
        mutation_prob: float = 0.2
        mutation_gene_prob: float = 0.1
        mutation_sigma: float = 0.1  # fraction of each parameter's bound range
        hall_of_fame_size: int = 2
        elitism: bool = True

    def validate(self):
        p = self.params
        if self.population_size < 2:
            raise ConfigurationError("the genetic algorithm needs a population of at least 2")
        if p.tournament_size < 1:
            raise ConfigurationError("tournament_size must be >= 1")
        for name in ("crossover_prob", "mutation_prob", "mutation_gene_prob"):
            if not 0.0 <= getattr(p, name) <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1]")
        if p.mutation_sigma < 0 or p.hall_of_fame_size < 0:
            raise ConfigurationError("mutation_sigma and hall_of_fame_size must be non-negative")
        if p.elitism and p.hall_of_fame_size >= self.population_size:
            raise ConfigurationError("hall_of_fame_size must be smaller than the population for elitism")
        self.hall_of_fame = HallOfFame(p.hall_of_fame_size)
        self.generation = 0

    def initialize(self, create_individual, rng):
        return np.array([create_individual(rng) for _ in range(self.population_size)])

    def step(self, population: EvaluatedPopulation, rng):
        population.require_ok()
        p = self.params
        ok = population.ok_mask
        self.hall_of_fame.update(population.vectors[ok], population.fitness[ok])

        parents = tournament_select(population.fitness, self.population_size, p.tournament_size, rng)
        offspring = population.vectors[parents].copy()
        parent_fitness = population.fitness[parents]

        for i in range(0, self.population_size - 1, 2):
            if rng.random() < p.crossover_prob:
                offspring[i], offspring[i + 1] = blend_crossover(offspring[i], offspring[i + 1], p.blend_alpha, rng)

        sigma = p.mutation_sigma * self.bounds.span
        for i in range(self.population_size):
            if rng.random() < p.mutation_prob:
                genes = rng.random(self.bounds.dimension) < p.mutation_gene_prob
                offspring[i] = offspring[i] + genes * rng.normal(0.0, 1.0, self.bounds.dimension) * sigma

        if p.elitism and self.hall_of_fame.members:
            # worst slots first; among equals the higher index is replaced first
            slots = np.lexsort((-np.arange(self.population_size), parent_fitness))
            for slot, (vector, _) in zip(slots, self.hall_of_fame.members):
                offspring[slot] = vector

        self.generation += 1
        return offspring

    def get_state(self):
        return {"hall_of_fame": self.hall_of_fame.to_json(), "rng_cursor": self.generation}

    def set_state(self, state):
        self.hall_of_fame = HallOfFame.from_json(self.params.hall_of_fame_size, state["hall_of_fame"])
        self.generation = int(state["rng_cursor"])
