"""Sample-based gradient ascent and its batched multi-range variant."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, OptimizerStepError
from .base import EvaluatedPopulation, Optimizer, to_list

logger = logging.getLogger(__name__)


def estimate_gradient(offsets: np.ndarray, fitness: np.ndarray, atol: float = 1e-14) -> np.ndarray | None:
    """Least-squares slope of ``fitness`` regressed on ``offsets`` (with intercept).

    Returns ``None`` when the offsets carry no spread at all.
    """
    offsets = np.atleast_2d(np.asarray(offsets, dtype=float))
    fitness = np.asarray(fitness, dtype=float)
    centered = offsets - offsets.mean(axis=0)
    if len(offsets) < 2 or np.max(np.abs(centered)) <= atol:
        return None
    # centering both sides absorbs the intercept
    residual = fitness - fitness.mean()
    if np.linalg.matrix_rank(centered) == centered.shape[1]:
        return np.linalg.solve(centered.T @ centered, centered.T @ residual)
    coef, *_ = np.linalg.lstsq(centered, residual, rcond=None)
    return coef


class GradientAscent(Optimizer):
    """Ascend along the regression slope of fitness over Gaussian samples around a current point."""

    name = "gd"

    @dataclass
    class Parameters:
        learning_rate: float = 0.01
        exploration_radius: float = 0.1

    def validate(self):
        if self.params.learning_rate <= 0 or self.params.exploration_radius <= 0:
            raise ConfigurationError("learning_rate and exploration_radius must be positive")
        self.current = None

    def _sample(self, rng):
        noise = rng.normal(0.0, self.params.exploration_radius, size=(self.population_size, self.bounds.dimension))
        return self.current + noise

    def initialize(self, create_individual, rng):
        self.current = np.asarray(create_individual(rng), dtype=float)
        return self._sample(rng)

    def step(self, population: EvaluatedPopulation, rng):
        population.require_ok()
        ok = population.ok_mask
        grad = estimate_gradient(population.vectors[ok] - self.current, population.fitness[ok])
        if grad is None:
            logger.warning("degenerate exploration samples; resampling around the unchanged point")
        else:
            self.current = self.bounds.clip_vector(self.current + self.params.learning_rate * grad)
        return self._sample(rng)

    def get_state(self):
        return {
            "current": None if self.current is None else to_list(self.current),
            "learning_rate": self.params.learning_rate,
            "exploration_radius": self.params.exploration_radius,
        }

    def set_state(self, state):
        self.current = None if state["current"] is None else np.asarray(state["current"], dtype=float)


def range_grid(center: np.ndarray, half_width: np.ndarray, points_per_axis: int,
               lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Endpoint-inclusive grid over ``center +- half_width``, translated to lie inside the bounds."""
    lo = center - half_width
    hi = center + half_width
    shift = np.where(lo < lower, lower - lo, 0.0) + np.where(hi > upper, upper - hi, 0.0)
    lo = np.maximum(lo + shift, lower)
    hi = np.minimum(hi + shift, upper)
    if points_per_axis == 1:
        axes = [np.array([c]) for c in np.clip(center, lower, upper)]
    else:
        axes = [np.linspace(a, b, points_per_axis) for a, b in zip(lo, hi)]
    return np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, len(center))


def mga_step(batches, half_widths, learning_rate: float, shrink: float, lower=None, upper=None):
    """Advance every batch independently.

    :param batches: sequence of ``(points, fitness)`` pairs, one parameter
        combination per fitness value.
    :param half_widths: current half-width vector of each batch's range.
    :return: list of ``(new_center, new_half_width, best_point, best_fitness)``;
        the new center is the batch's best point moved by ``learning_rate``
        along the batch's regression slope.
    """
    results = []
    for (points, fitness), half_width in zip(batches, half_widths):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        fitness = np.asarray(fitness, dtype=float).reshape(-1)
        if fitness.size == 0 or len(points) != fitness.size:
            raise OptimizerStepError("every batch needs one fitness per parameter combination")
        best = int(np.lexsort((np.arange(fitness.size), -fitness))[0])
        grad = estimate_gradient(points - points[best], fitness)
        center = points[best].copy()
        if grad is not None:
            center = center + learning_rate * grad
        if lower is not None:
            center = np.clip(center, lower, upper)
        results.append((center, np.asarray(half_width, dtype=float) * shrink, points[best].copy(), float(fitness[best])))
    return results


class MultiGradientAscent(Optimizer):
    """Gradient ascent over several parameter ranges at once.

    Each batch expands its range into a grid of ``points_per_axis ** D``
    combinations plus its incumbent best point; after evaluation the batch's
    fitnesses are tied back to their combinations, the best one is moved
    along the estimated gradient and becomes the center of a narrower range.
    The population is the concatenation of all batches.
    """

    name = "mga"

    @dataclass
    class Parameters:
        n_batches: int = 4
        points_per_axis: int = 8
        learning_rate: float = 0.01
        shrink: float = 0.5
        initial_width: float = 1.0  # initial full range width as a fraction of the bound range

    def validate(self):
        p = self.params
        if p.n_batches < 1 or p.points_per_axis < 1:
            raise ConfigurationError("n_batches and points_per_axis must be >= 1")
        if not 0.0 < p.shrink <= 1.0:
            raise ConfigurationError("shrink must lie in (0, 1]")
        if p.learning_rate < 0 or p.initial_width <= 0:
            raise ConfigurationError("learning_rate must be >= 0 and initial_width > 0")
        expected = self.batch_size * p.n_batches
        if self.population_size != expected:
            raise ConfigurationError(
                f"mga with {p.n_batches} batches of {p.points_per_axis}^{self.bounds.dimension} grid points "
                f"plus one incumbent needs population_size {expected}, got {self.population_size}")
        self.centers = None
        self.half_widths = None
        self.incumbents = None

    @property
    def batch_size(self) -> int:
        return self.params.points_per_axis ** self.bounds.dimension + 1

    def _expand(self):
        blocks = []
        for center, half_width, incumbent in zip(self.centers, self.half_widths, self.incumbents):
            grid = range_grid(center, half_width, self.params.points_per_axis, self.bounds.lower, self.bounds.upper)
            blocks.append(np.vstack([incumbent[None, :], grid]))
        return np.vstack(blocks)

    def initialize(self, create_individual, rng):
        self.centers = np.array([create_individual(rng) for _ in range(self.params.n_batches)])
        self.half_widths = np.tile(0.5 * self.params.initial_width * self.bounds.span, (self.params.n_batches, 1))
        self.incumbents = self.centers.copy()
        return self._expand()

    def step(self, population: EvaluatedPopulation, rng):
        population.require_ok()
        size = self.batch_size
        batches, keep = [], []
        for b in range(self.params.n_batches):
            rows = slice(b * size, (b + 1) * size)
            ok = population.ok_mask[rows]
            keep.append(ok.any())
            if ok.any():
                batches.append((population.vectors[rows][ok], population.fitness[rows][ok]))
            else:
                batches.append(None)
        live = [i for i, k in enumerate(keep) if k]
        moved = mga_step([batches[i] for i in live], self.half_widths[live], self.params.learning_rate,
                         self.params.shrink, self.bounds.lower, self.bounds.upper)
        for i, (center, half_width, best, _) in zip(live, moved):
            self.centers[i] = center
            self.half_widths[i] = half_width
            self.incumbents[i] = best
        return self._expand()

    def get_state(self):
        if self.centers is None:
            return {"centers": None, "half_widths": None, "incumbents": None,
                    "learning_rate": self.params.learning_rate}
        return {
            "centers": to_list(self.centers),
            "half_widths": to_list(self.half_widths),
            "incumbents": to_list(self.incumbents),
            "learning_rate": self.params.learning_rate,
        }

    def set_state(self, state):
        if state["centers"] is None:
            self.centers = self.half_widths = self.incumbents = None
            return
        self.centers = np.asarray(state["centers"], dtype=float)
        self.half_widths = np.asarray(state["half_widths"], dtype=float)
        self.incumbents = np.asarray(state["incumbents"], dtype=float)
