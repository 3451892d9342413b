"""
Evolving a mountain car controller
==================================

The optimizee is a tiny two-layer network that maps an encoding of position
and velocity to one of three actions; its fitness is the furthest position
reached during an episode. A genetic algorithm tunes the weights.
"""

# %%
import tempfile

import numpy as np

from twoloop.benchmarks import mountain_car as mc
from twoloop.config import RunConfig
from twoloop.core import best_entry
from twoloop.engine import run_generation_loop

# %%
# The environment on its own: pushing in the direction of motion pumps
# energy into the car until it crosses the goal at 0.5.
best, steps = mc.run_episode(lambda p, v: mc.PUSH_RIGHT if v > 0 else mc.PUSH_LEFT, -0.45)
print(f"bang-bang policy: best position {best:.4f} after {steps} steps")

# %%
# A short evolutionary run; the acceptance test uses 400 generations.
cfg = RunConfig(run_name="car", optimizee="mountain_car", optimizer="ga",
                population_size=32, generations=40, seed=1, worst_fitness=-2.0,
                results_root=tempfile.mkdtemp(prefix="twoloop-car-"))
traj = run_generation_loop(cfg, *cfg.build())
curve = np.maximum.accumulate([max(e.weighted_fitness for e in r.entries) for r in traj])
print("best position so far, every 10 generations:", np.round(curve[::10], 3))
ind, fitness, generation = best_entry(traj)
print(f"best individual: fitness {fitness[0]:.4f} in generation {generation}")
