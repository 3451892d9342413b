"""Mountain car with a binned one-hot state encoding and a 60-5-3 rectified policy network."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, EvaluationError

MIN_POSITION, MAX_POSITION = -1.2, 0.6
MAX_SPEED = 0.07
GOAL_POSITION = 0.5
FORCE = 0.001
GRAVITY = 0.0025
# encoding range for velocity; wider than the dynamics clamp
ENCODING_VELOCITY = (-0.7, 0.7)
N_BINS = 30
N_HIDDEN = 5
N_ACTIONS = 3
N_INPUTS = 2 * N_BINS
N_WEIGHTS = N_INPUTS * N_HIDDEN + N_HIDDEN * N_ACTIONS  # 315
MAX_STEPS = 110
PUSH_LEFT, NO_PUSH, PUSH_RIGHT = 0, 1, 2


@dataclass
class MountainCarState:
    position: float
    velocity: float = 0.0
    steps: int = 0


def step(state: MountainCarState, action: int) -> MountainCarState:
    velocity = state.velocity + (action - 1) * FORCE - GRAVITY * math.cos(3.0 * state.position)
    velocity = min(max(velocity, -MAX_SPEED), MAX_SPEED)
    position = min(max(state.position + velocity, MIN_POSITION), MAX_POSITION)
    if position == MIN_POSITION and velocity < 0:
        velocity = 0.0
    return MountainCarState(position, velocity, state.steps + 1)


def bin_index(value: float, low: float, high: float, n: int = N_BINS) -> int:
    width = (high - low) / n
    return int(min(max(math.floor((value - low) / width), 0), n - 1))


def encode(position: float, velocity: float) -> np.ndarray:
    x = np.zeros(N_INPUTS)
    x[bin_index(position, MIN_POSITION, MAX_POSITION)] = 1.0
    x[N_BINS + bin_index(velocity, *ENCODING_VELOCITY)] = 1.0
    return x


def unpack_weights(weights) -> tuple[np.ndarray, np.ndarray]:
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != N_WEIGHTS:
        raise ConfigurationError(f"the policy network has {N_WEIGHTS} weights, got {w.size}")
    if not np.all(np.isfinite(w)):
        raise EvaluationError("non-finite policy weights")
    split = N_INPUTS * N_HIDDEN
    return w[:split].reshape(N_INPUTS, N_HIDDEN), w[split:].reshape(N_HIDDEN, N_ACTIONS)


def choose_action(outputs: np.ndarray) -> int:
    """Winner-take-all; a tied maximum means no push."""
    best = np.max(outputs)
    winners = np.flatnonzero(outputs == best)
    return int(winners[0]) if winners.size == 1 else NO_PUSH


def policy_action(w_in: np.ndarray, w_out: np.ndarray, position: float, velocity: float) -> int:
    hidden = np.maximum(encode(position, velocity) @ w_in, 0.0)
    return choose_action(np.maximum(hidden @ w_out, 0.0))


def run_episode(policy, start_position: float, max_steps: int = MAX_STEPS) -> tuple[float, int]:
    """Run ``policy(position, velocity) -> action``; returns (max position, steps taken)."""
    state = MountainCarState(start_position)
    best = state.position
    while state.steps < max_steps and state.position < GOAL_POSITION:
        state = step(state, policy(state.position, state.velocity))
        best = max(best, state.position)
    return best, state.steps


def start_position(rng: np.random.Generator) -> float:
    return float(rng.uniform(-0.6, -0.4))


def mountain_car_episode(weights, rng: np.random.Generator, max_steps: int = MAX_STEPS) -> float:
    """Maximum position reached by the network policy from a random start."""
    w_in, w_out = unpack_weights(weights)
    best, _ = run_episode(lambda p, v: policy_action(w_in, w_out, p, v), start_position(rng), max_steps)
    return best
