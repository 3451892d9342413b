"""Pure fitness functions of the benchmark optimizees.

Every function here is deterministic and side-effect free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, EvaluationError

# ---------------------------------------------------------------------------------------------
# classification


def softmax(x, axis: int = -1) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def mse_fitness(predictions, labels) -> float:
    """``1 - mean_i ||y_i - yhat_i||^2``: squared error summed over classes, averaged over samples."""
    pred = np.atleast_2d(np.asarray(predictions, dtype=float))
    lab = np.atleast_2d(np.asarray(labels, dtype=float))
    if pred.shape != lab.shape:
        raise ConfigurationError(f"predictions {pred.shape} and labels {lab.shape} differ in shape")
    return float(1.0 - np.mean(np.sum((lab - pred) ** 2, axis=1)))


@dataclass(frozen=True)
class ClassifierTask:
    features: np.ndarray  # N x D_in
    labels: np.ndarray  # N x C, one-hot

    def __post_init__(self):
        if self.labels.shape[1] < 2:
            raise ConfigurationError("a classifier task needs at least two classes")
        if not np.allclose(self.labels.sum(axis=1), 1.0) or not np.all(np.isin(self.labels, (0.0, 1.0))):
            raise ConfigurationError("labels must be one-hot rows")
        if len(self.features) != len(self.labels):
            raise ConfigurationError("features and labels must have the same number of rows")

    @property
    def n_classes(self) -> int:
        return self.labels.shape[1]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def predict(self, weights) -> np.ndarray:
        w = np.asarray(weights, dtype=float).reshape(self.n_features, self.n_classes)
        return softmax(self.features @ w, axis=1)


def make_blobs(n_classes: int = 3, n_features: int = 4, samples_per_class: int = 20,
               separation: float = 3.0, spread: float = 1.0, seed: int = 0) -> ClassifierTask:
    """Gaussian blobs around random unit-direction centers; a constant bias column is appended."""
    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(n_classes, n_features - 1))
    centers = separation * directions / np.linalg.norm(directions, axis=1, keepdims=True)
    x = np.concatenate([c + spread * rng.normal(size=(samples_per_class, n_features - 1)) for c in centers])
    x = np.column_stack([x, np.ones(len(x))])
    y = np.repeat(np.eye(n_classes), samples_per_class, axis=0)
    return ClassifierTask(x, y)


# ---------------------------------------------------------------------------------------------
# trace fitting


def damped_oscillator(amplitude: float, decay: float, frequency: float, offset: float, t: np.ndarray,
                      stimulus: float = 1.0) -> np.ndarray:
    """``offset + stimulus * amplitude * exp(-t / decay) * sin(2 pi frequency t)``."""
    t = np.asarray(t, dtype=float)
    return offset + stimulus * amplitude * np.exp(-t / decay) * np.sin(2.0 * np.pi * frequency * t)


@dataclass(frozen=True)
class TraceTask:
    reference: np.ndarray  # samples at t * tau, t = 0..T
    tau: float
    stimulus: float = 1.0

    def __post_init__(self):
        if len(self.reference) < 2 or self.tau <= 0:
            raise ConfigurationError("a trace needs at least two samples and a positive sampling interval")

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.reference)) * self.tau

    def simulate(self, params) -> np.ndarray:
        amplitude, decay, frequency, offset = np.asarray(params, dtype=float).reshape(4)
        return damped_oscillator(amplitude, decay, frequency, offset, self.times, self.stimulus)


def trace_fitness(params, task: TraceTask) -> float:
    """``-(1 / T^2) * sum_{t=0..T} (U_ref - U_sim)^2`` where the trace has T + 1 samples."""
    sim = task.simulate(params)
    T = len(task.reference) - 1
    return float(-np.sum((task.reference - sim) ** 2) / T**2)


def spike_count_fitness(trace, threshold: float, dt: float) -> float:
    """Upward threshold crossings per unit time over a trace sampled every ``dt``."""
    trace = np.asarray(trace, dtype=float)
    if len(trace) < 2:
        return 0.0
    crossings = np.count_nonzero((trace[:-1] < threshold) & (trace[1:] >= threshold))
    return crossings / ((len(trace) - 1) * dt)


# ---------------------------------------------------------------------------------------------
# network / functional connectivity


@dataclass(frozen=True)
class NetworkTask:
    sc: np.ndarray  # M x M structural connectivity
    tract_lengths: np.ndarray  # M x M
    coupling: float
    speed: float
    dt: float = 0.1
    n_steps: int = 1000
    warmup: int = 200
    noise_sigma: float = 0.1
    decay: float = 1.0
    x0: np.ndarray | None = None

    def __post_init__(self):
        sc = np.asarray(self.sc, dtype=float)
        if sc.ndim != 2 or sc.shape[0] != sc.shape[1] or sc.shape[0] < 2:
            raise ConfigurationError("structural connectivity must be a square matrix with at least 2 nodes")
        if np.any(sc < 0):
            raise ConfigurationError("structural connectivity must be non-negative")
        if self.speed <= 0:
            raise ConfigurationError("conduction speed must be positive")
        if not 0 <= self.warmup < self.n_steps:
            raise ConfigurationError("warmup must be shorter than the simulation")

    @property
    def delay_steps(self) -> np.ndarray:
        return np.rint(np.asarray(self.tract_lengths, dtype=float) / (self.speed * self.dt)).astype(int)


def simulate_network(task: NetworkTask, rng: np.random.Generator | None = None) -> np.ndarray:
    """Euler integration of linear delayed rate dynamics; returns M x (n_steps - warmup).

    ``x_i(t+1) = (1 - decay dt) x_i(t) + g dt sum_j SC_ij x_j(t - d_ij) + sigma sqrt(dt) xi_i``,
    with the initial state standing in for times before 0.
    """
    if task.coupling < 0:
        raise ConfigurationError("coupling must be non-negative")
    sc = np.asarray(task.sc, dtype=float)
    m = sc.shape[0]
    delays = task.delay_steps
    if np.any(delays < 0) or np.any(delays >= task.n_steps):
        raise ConfigurationError("delays must lie in [0, n_steps)")
    x = np.zeros((task.n_steps, m))
    if task.x0 is not None:
        x[0] = task.x0
    cols = np.broadcast_to(np.arange(m), (m, m))
    leak = 1.0 - task.decay * task.dt
    gdt = task.coupling * task.dt
    noise_scale = task.noise_sigma * math.sqrt(task.dt)
    if noise_scale > 0:
        if rng is None:
            raise ConfigurationError("a noisy network simulation needs a random generator")
        noise = noise_scale * rng.standard_normal((task.n_steps - 1, m))
    else:
        noise = np.zeros((task.n_steps - 1, m))
    for t in range(task.n_steps - 1):
        delayed = x[np.maximum(t - delays, 0), cols]
        x[t + 1] = leak * x[t] + gdt * np.sum(sc * delayed, axis=1) + noise[t]
        if not np.all(np.abs(x[t + 1]) <= 1e6):
            raise EvaluationError(f"network activity diverged at step {t + 1}")
    return x[task.warmup:].T.copy()


def functional_connectivity(activity) -> np.ndarray:
    """Pearson correlation matrix between node time series (rows)."""
    activity = np.asarray(activity, dtype=float)
    std = activity.std(axis=1)
    if np.any(std == 0):
        raise EvaluationError(f"constant signal at nodes {np.flatnonzero(std == 0).tolist()}")
    return np.corrcoef(activity)


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    dx, dy = x - x.mean(), y - y.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0:
        raise EvaluationError("correlation with a constant signal is undefined")
    return float(dx @ dy / denom)


def fc_sc_fitness(activity, sc) -> float:
    """Correlation between the flattened functional connectivity and the max-normalized SC."""
    sc = np.asarray(sc, dtype=float)
    fc = functional_connectivity(activity)
    return pearson(fc, sc / sc.max())


def random_connectivity(n_nodes: int = 8, seed: int = 0, density: float = 0.6) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric non-negative SC with zero diagonal, plus symmetric tract lengths in [1, 10].

    The SC is scaled to unit spectral radius so that couplings below the decay
    rate give stable dynamics.
    """
    rng = np.random.default_rng(seed)
    w = rng.random((n_nodes, n_nodes)) * (rng.random((n_nodes, n_nodes)) < density)
    sc = np.triu(w, 1)
    sc = sc + sc.T
    radius = np.max(np.abs(np.linalg.eigvalsh(sc)))
    if radius > 0:
        sc = sc / radius
    lengths = np.triu(rng.uniform(1.0, 10.0, (n_nodes, n_nodes)), 1)
    lengths = lengths + lengths.T
    return sc, lengths


def load_sc_csv(path) -> np.ndarray:
    """Square, headerless, comma-separated structural connectivity."""
    sc = np.loadtxt(path, delimiter=",", ndmin=2)
    if sc.shape[0] != sc.shape[1]:
        raise ConfigurationError(f"{path}: SC matrix must be square, got {sc.shape}")
    return sc


# ---------------------------------------------------------------------------------------------
# fitness accounting

COLONY_REWARDS = {
    "rotations": -0.02,
    "pheromone_drops": -0.05,
    "movements": -0.25,
    "rests": -0.5,
    "nest_returns": 220.0,
    "food_touches": 1.5,
}


@dataclass
class ColonyEventLog:
    """Event counts indexed [step, ant]; missing event kinds count as zero."""

    rotations: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    pheromone_drops: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    movements: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    rests: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    nest_returns: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    food_touches: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        for name in COLONY_REWARDS:
            counts = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if np.any(counts < 0) or np.any(counts != np.floor(counts)):
                raise ConfigurationError(f"{name} counts must be non-negative integers")
            setattr(self, name, counts)


def colony_fitness(log: ColonyEventLog) -> float:
    """Rewards for nest returns with food and food touches minus movement-related costs."""
    return float(sum(reward * np.sum(getattr(log, name)) for name, reward in COLONY_REWARDS.items()))


def sp_fitness_two_pop(rates, targets, floor: float = 1e-6) -> float:
    """``1 / max(0.8 |rate_e - target_e| + 0.2 |rate_i - target_i|, floor)``."""
    (le, li), (ee, ei) = rates, targets
    return 1.0 / max(0.8 * abs(le - ee) + 0.2 * abs(li - ei), floor)


def sp_fitness_microcircuit(rates, targets, floor: float = 1e-6) -> float:
    """``1 / max(sum over 4 layers x {e, i} of |rate - target|, floor)``."""
    rates = np.asarray(rates, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if rates.shape != (4, 2) or targets.shape != (4, 2):
        raise ConfigurationError("microcircuit rates and targets must be 4 layers x (excitatory, inhibitory)")
    return 1.0 / max(float(np.sum(np.abs(rates - targets))), floor)


# ---------------------------------------------------------------------------------------------
# analytic test functions (negated for maximization)


def sphere(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(-np.sum(x**2))


def rastrigin(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(-(10.0 * x.size + np.sum(x**2 - 10.0 * np.cos(2.0 * np.pi * x))))


def rosenbrock(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(-np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


ANALYTIC_FUNCTIONS = {"sphere": sphere, "rastrigin": rastrigin, "rosenbrock": rosenbrock}


def analytic_function(name: str, x) -> float:
    try:
        fn = ANALYTIC_FUNCTIONS[name]
    except KeyError:
        raise ConfigurationError(f"unknown test function {name!r}; available: {sorted(ANALYTIC_FUNCTIONS)}") from None
    return fn(x)
