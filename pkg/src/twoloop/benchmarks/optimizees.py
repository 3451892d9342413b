"""Benchmark optimizees: parameter bounds plus a ``simulate`` built on the fitness functions."""

from __future__ import annotations

import numpy as np

from ..core import Bounds, Evaluation, ParameterBounds
from ..engine import Optimizee
from ..errors import ConfigurationError
from . import fitness as F
from . import mountain_car as mc


class AnalyticOptimizee(Optimizee):
    """Negated sphere / Rastrigin / Rosenbrock over a box."""

    def __init__(self, function: str = "sphere", dimension: int = 2, lower: float = -5.0, upper: float = 5.0):
        if function not in F.ANALYTIC_FUNCTIONS:
            raise ConfigurationError(f"unknown test function {function!r}")
        if dimension < 1:
            raise ConfigurationError("dimension must be >= 1")
        self.function = function
        self.bounds = Bounds({"x": ParameterBounds(np.full(dimension, lower), np.full(dimension, upper))})

    def simulate(self, params, rng):
        return F.analytic_function(self.function, params["x"])


class ClassifierOptimizee(Optimizee):
    """Softmax readout of synthetic Gaussian blobs; fitness ``1 - MSE``, model output the predictions."""

    def __init__(self, n_classes: int = 3, n_features: int = 4, samples_per_class: int = 20,
                 separation: float = 3.0, spread: float = 1.0, data_seed: int = 0, weight_bound: float = 5.0):
        self.task = F.make_blobs(n_classes, n_features, samples_per_class, separation, spread, data_seed)
        size = n_features * n_classes
        self.bounds = Bounds({"weights": ParameterBounds(np.full(size, -weight_bound), np.full(size, weight_bound))})

    def observation_target(self) -> np.ndarray:
        return self.task.labels.ravel()

    def simulate(self, params, rng):
        pred = self.task.predict(params["weights"])
        return Evaluation(np.array([F.mse_fitness(pred, self.task.labels)]), pred.ravel())


class TraceFitOptimizee(Optimizee):
    """Fit a damped-oscillator model to a reference trace under one or more stimuli.

    The fitness vector is ``(L(I0), S(I0), L(I1), S(I1), ...)`` with ``L`` the
    negative normalized squared error and ``S`` the negative absolute
    difference of threshold-crossing rates; without ``spike_threshold`` only
    the ``L`` components are returned.
    """

    PARAMS = ("amplitude", "decay", "frequency", "offset")

    def __init__(self, true_params=(10.0, 0.05, 40.0, -65.0), n_samples: int = 201, tau: float = 0.0005,
                 stimuli=(1.0,), spike_threshold: float | None = None,
                 lower=(1.0, 0.01, 10.0, -80.0), upper=(20.0, 0.2, 80.0, -50.0)):
        self.true_params = np.asarray(true_params, dtype=float)
        reference_times = np.arange(n_samples) * tau
        self.tasks = [
            F.TraceTask(F.damped_oscillator(*self.true_params, reference_times, s), tau, s) for s in stimuli
        ]
        self.spike_threshold = spike_threshold
        self.fitness_length = len(self.tasks) * (1 if spike_threshold is None else 2)
        self.bounds = Bounds({name: ParameterBounds([lo], [hi]) for name, lo, hi in zip(self.PARAMS, lower, upper)})

    def fitness_vector(self, p) -> np.ndarray:
        out = []
        for task in self.tasks:
            out.append(F.trace_fitness(p, task))
            if self.spike_threshold is not None:
                ref = F.spike_count_fitness(task.reference, self.spike_threshold, task.tau)
                sim = F.spike_count_fitness(task.simulate(p), self.spike_threshold, task.tau)
                out.append(-abs(sim - ref))
        return np.array(out)

    def simulate(self, params, rng):
        return self.fitness_vector([params[name][0] for name in self.PARAMS])


class FcMatchOptimizee(Optimizee):
    """Coupling and conduction speed of a delayed linear network, scored by FC-SC correlation.

    The noise realization is fixed by ``noise_seed`` so that the fitness is a
    deterministic function of the two parameters.
    """

    def __init__(self, n_nodes: int = 8, sc_seed: int = 0, sc_file: str | None = None,
                 coupling=(0.0, 1.0), speed=(1.0, 20.0), dt: float = 0.1, n_steps: int = 1000,
                 warmup: int = 200, noise_sigma: float = 0.1, decay: float = 1.0, noise_seed: int = 1234):
        sc, lengths = F.random_connectivity(n_nodes, sc_seed)
        if sc_file is not None:
            sc = F.load_sc_csv(sc_file)
            lengths = F.random_connectivity(sc.shape[0], sc_seed)[1]
        self.sc, self.tract_lengths = sc, lengths
        self.settings = dict(dt=dt, n_steps=n_steps, warmup=warmup, noise_sigma=noise_sigma, decay=decay)
        self.noise_seed = noise_seed
        self.bounds = Bounds({"coupling": ParameterBounds([coupling[0]], [coupling[1]]),
                              "speed": ParameterBounds([speed[0]], [speed[1]])})

    def task(self, coupling: float, speed: float) -> F.NetworkTask:
        return F.NetworkTask(self.sc, self.tract_lengths, coupling, speed, **self.settings)

    def fitness(self, coupling: float, speed: float) -> float:
        activity = F.simulate_network(self.task(coupling, speed), np.random.default_rng(self.noise_seed))
        return F.fc_sc_fitness(activity, self.sc)

    def simulate(self, params, rng):
        return self.fitness(float(params["coupling"][0]), float(params["speed"][0]))


class MountainCarOptimizee(Optimizee):
    """Policy weights of the mountain-car controller; fitness is the maximum position reached.

    With ``episode_seed`` every evaluation starts from the same position;
    otherwise the start is drawn from the evaluation's own random stream.
    """

    def __init__(self, weight_bound: float = 20.0, episode_seed: int | None = None, max_steps: int = mc.MAX_STEPS):
        self.episode_seed = episode_seed
        self.max_steps = max_steps
        self.bounds = Bounds({"weights": ParameterBounds(np.full(mc.N_WEIGHTS, -weight_bound),
                                                         np.full(mc.N_WEIGHTS, weight_bound))})

    def simulate(self, params, rng):
        if self.episode_seed is not None:
            rng = np.random.default_rng(self.episode_seed)
        return mc.mountain_car_episode(params["weights"], rng, self.max_steps)


class ExternalOptimizee(Optimizee):
    """Parameter declaration for a simulator evaluated through the external command protocol."""

    def __init__(self, parameters: dict, fitness_length: int = 1):
        if not parameters:
            raise ConfigurationError("an external optimizee must declare its parameters")
        self.bounds = Bounds.from_json(parameters)
        self.fitness_length = int(fitness_length)

    def simulate(self, params, rng):
        raise ConfigurationError("external optimizees are evaluated by the external command, not in-process")


def _analytic(function):
    def factory(**kwargs):
        return AnalyticOptimizee(function, **kwargs)
    factory.__name__ = f"{function}_optimizee"
    return factory


OPTIMIZEES = {
    "sphere": _analytic("sphere"),
    "rastrigin": _analytic("rastrigin"),
    "rosenbrock": _analytic("rosenbrock"),
    "classifier": ClassifierOptimizee,
    "trace_fit": TraceFitOptimizee,
    "fc_match": FcMatchOptimizee,
    "mountain_car": MountainCarOptimizee,
    "external": ExternalOptimizee,
}


def make_optimizee(name: str, params: dict | None = None) -> Optimizee:
    try:
        factory = OPTIMIZEES[name]
    except KeyError:
        raise ConfigurationError(f"unknown optimizee {name!r}; available: {sorted(OPTIMIZEES)}") from None
    try:
        return factory(**(params or {}))
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for optimizee {name!r}: {exc}") from None
