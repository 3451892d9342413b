"""
Comparing outer-loop optimizers on a sphere
===========================================

Every optimizer sees the same negated sphere in five dimensions, the same
population size and the same seed, so the only thing that differs is the
update rule.
"""

# %%
import tempfile

import numpy as np

from twoloop.config import RunConfig
from twoloop.core import best_entry
from twoloop.engine import run_generation_loop

results = tempfile.mkdtemp(prefix="twoloop-sphere-")

# %%
# A run is described by a ``RunConfig``; ``build`` gives the optimizee
# (the inner loop) and the optimizer (the outer loop).
def run(optimizer, **params):
    cfg = RunConfig(run_name=optimizer, optimizee="sphere", optimizer=optimizer,
                    optimizee_params={"dimension": 5}, optimizer_params=params,
                    population_size=16, generations=100, seed=0, worst_fitness=-1e9,
                    results_root=results)
    return run_generation_loop(cfg, *cfg.build())


# %%
# The best fitness per generation tells how fast each one closes in on 0.
for name in ("ga", "ce", "sa", "es", "gd"):
    traj = run(name)
    curve = [max(e.weighted_fitness for e in r.entries) for r in traj]
    _, fitness, generation = best_entry(traj)
    print(f"{name:>3}: generation 0 {curve[0]:10.4f}   generation 50 {curve[50]:12.3e}   "
          f"best {fitness[0]:.3e} (generation {generation})")

# %%
# Grid search is the odd one out: it ignores fitness and just walks the grid.
traj = run("grid", resolution=3)
print("grid points evaluated:", sum(len(r.entries) for r in traj))
print("best grid point:", best_entry(traj)[0].as_dict()["x"])
