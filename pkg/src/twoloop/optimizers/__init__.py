"""Outer-loop optimizers, registered under the config block names."""

from .annealing import SimulatedAnnealing, acceptance_probability, metropolis_accept
from .base import EvaluatedPopulation, Optimizer
from .cross_entropy import CrossEntropy, fit_elites
from .enkf import EnsembleKalman, enkf_update, rank_replace
from .evolution import EvolutionStrategies, centered_ranks, es_update
from .genetic import GeneticAlgorithm, HallOfFame, blend_crossover, tournament_select
from .gradient import GradientAscent, MultiGradientAscent, estimate_gradient, mga_step, range_grid
from .grid import GridSearch, grid_search_plan

from ..errors import ConfigurationError

OPTIMIZERS = {
    cls.name: cls
    for cls in (GeneticAlgorithm, EnsembleKalman, GradientAscent, MultiGradientAscent,
                CrossEntropy, SimulatedAnnealing, GridSearch, EvolutionStrategies)
}


def make_optimizer(name: str, bounds, population_size: int, parameters=None) -> Optimizer:
    try:
        cls = OPTIMIZERS[name]
    except KeyError:
        raise ConfigurationError(f"unknown optimizer {name!r}; available: {sorted(OPTIMIZERS)}") from None
    return cls(bounds, population_size, parameters)


__all__ = [
    "OPTIMIZERS", "make_optimizer", "Optimizer", "EvaluatedPopulation",
    "GeneticAlgorithm", "EnsembleKalman", "GradientAscent", "MultiGradientAscent",
    "CrossEntropy", "SimulatedAnnealing", "GridSearch", "EvolutionStrategies",
    "HallOfFame", "tournament_select", "blend_crossover",
    "enkf_update", "rank_replace", "estimate_gradient", "mga_step", "range_grid",
    "fit_elites", "acceptance_probability", "metropolis_accept",
    "grid_search_plan", "centered_ranks", "es_update",
]
