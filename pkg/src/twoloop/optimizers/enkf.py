"""Ensemble Kalman inversion with rank-based replacement of poor ensemble members."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, EvaluationError, OptimizerStepError
from .base import EvaluatedPopulation, Optimizer, to_list


def enkf_update(ensemble: np.ndarray, outputs: np.ndarray, target: np.ndarray, gamma: float) -> np.ndarray:
    """One ensemble Kalman inversion step.

    :param ensemble: D x J matrix, one parameter vector per column.
    :param outputs: K x J matrix of model outputs g(u_j).
    :param target: length-K observation vector.
    :param gamma: additive regularization of the output covariance, > 0.
    :return: updated D x J ensemble
        ``u_j + C_ug (C_gg + gamma I)^-1 (target - g_j)`` with sample
        covariances normalized by J - 1.
    """
    u = np.asarray(ensemble, dtype=float)
    g = np.asarray(outputs, dtype=float)
    y = np.asarray(target, dtype=float).reshape(-1)
    if u.ndim != 2 or g.ndim != 2 or u.shape[1] != g.shape[1]:
        raise ValueError(f"ensemble {u.shape} and outputs {g.shape} must be D x J and K x J")
    if g.shape[0] != y.size:
        raise ValueError(f"outputs have {g.shape[0]} rows but the target has {y.size} entries")
    n = u.shape[1]
    if n < 2:
        raise ValueError("the ensemble needs at least 2 members")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if not np.all(np.isfinite(g)):
        raise EvaluationError("non-finite model outputs")

    du = u - u.mean(axis=1, keepdims=True)
    dg = g - g.mean(axis=1, keepdims=True)
    c_ug = du @ dg.T / (n - 1)
    c_gg = dg @ dg.T / (n - 1)
    innovation = y[:, None] - g
    gain_input = np.linalg.solve(c_gg + gamma * np.eye(y.size), innovation)
    return u + c_ug @ gain_input


def rank_replace(vectors: np.ndarray, fitness: np.ndarray, fraction: float, noise_sigma: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Overwrite the worst ``floor(fraction * J)`` rows with perturbed copies of the best ones.

    The i-th worst row receives the i-th best row plus independent Gaussian
    noise per component. Ranking uses ``fitness`` with the lower index winning ties.
    """
    if not 0.0 < fraction <= 0.5:
        raise ConfigurationError("replace fraction must lie in (0, 0.5]")
    vectors = np.array(vectors, dtype=float)
    fitness = np.asarray(fitness, dtype=float)
    n = math.floor(fraction * len(fitness))
    if n == 0:
        return vectors
    order = np.lexsort((np.arange(len(fitness)), -fitness))
    best, worst = order[:n], order[::-1][:n]
    noise = rng.normal(0.0, noise_sigma, size=(n, vectors.shape[1])) if noise_sigma > 0 else 0.0
    vectors[worst] = vectors[best] + noise
    return vectors


class EnsembleKalman(Optimizer):
    """EnKF outer loop operating on bound-normalized parameters.

    The optimizee must return a model output per individual and expose the
    observation to match through ``observation_target()`` unless ``target``
    is given explicitly.
    """

    name = "enkf"

    @dataclass
    class Parameters:
        gamma: float = 0.5
        replace_fraction: float = 0.1
        noise_sigma: float = 0.05  # in normalized [0, 1] units
        normalize: bool = True
        target: list | None = None

    def validate(self):
        p = self.params
        if p.gamma <= 0:
            raise ConfigurationError("gamma must be positive")
        if not 0.0 < p.replace_fraction <= 0.5:
            raise ConfigurationError("replace_fraction must lie in (0, 0.5]")
        if p.noise_sigma < 0:
            raise ConfigurationError("noise_sigma must be non-negative")
        if self.population_size < 2:
            raise ConfigurationError("the ensemble needs at least 2 members")
        self.target = None if p.target is None else np.asarray(p.target, dtype=float)
        self.ensemble = None

    def bind(self, optimizee):
        if self.target is None:
            get_target = getattr(optimizee, "observation_target", None)
            if get_target is None:
                raise ConfigurationError("enkf needs an optimizee with observation_target() or an explicit target")
            self.target = np.asarray(get_target(), dtype=float)

    def _to_internal(self, vectors):
        return self.bounds.normalize(vectors) if self.params.normalize else np.asarray(vectors, dtype=float)

    def _to_external(self, vectors):
        return self.bounds.denormalize(vectors) if self.params.normalize else vectors

    def initialize(self, create_individual, rng):
        population = np.array([create_individual(rng) for _ in range(self.population_size)])
        self.ensemble = self._to_internal(population).T
        return population

    def step(self, population: EvaluatedPopulation, rng):
        population.require_ok()
        if self.target is None:
            raise OptimizerStepError("enkf has no observation target")
        if population.model_outputs is None:
            raise OptimizerStepError("enkf needs model outputs from the optimizee")
        p = self.params
        ensemble = self._to_internal(population.vectors).T
        ok = [i for i, (s, out) in enumerate(zip(population.ok_mask, population.model_outputs))
              if s and out is not None]
        if len(ok) >= 2:
            outputs = np.column_stack([np.asarray(population.model_outputs[i], dtype=float).reshape(-1) for i in ok])
            ensemble[:, ok] = enkf_update(ensemble[:, ok], outputs, self.target, p.gamma)
        replaced = rank_replace(ensemble.T, population.fitness, p.replace_fraction, p.noise_sigma, rng)
        self.ensemble = replaced.T
        return self._to_external(replaced)

    def get_state(self):
        p = self.params
        return {
            "ensemble": None if self.ensemble is None else to_list(self.ensemble),
            "gamma": p.gamma,
            "replace_fraction": p.replace_fraction,
            "noise_sigma": p.noise_sigma,
        }

    def set_state(self, state):
        self.ensemble = None if state["ensemble"] is None else np.asarray(state["ensemble"], dtype=float)
