"""
Matching functional to structural connectivity
==============================================

A small delayed network has two free parameters, the global coupling and the
conduction speed. The fitness is the correlation between the simulated
functional connectivity and the structural connectivity. Multi-gradient
ascent runs several local searches in parallel, each sampling a shrinking
grid around its incumbent.
"""

# %%
import tempfile

import numpy as np

from twoloop.benchmarks import FcMatchOptimizee
from twoloop.config import RunConfig
from twoloop.engine import run_generation_loop

optimizee = FcMatchOptimizee()
print(optimizee.bounds)

# %%
# A coarse exhaustive sweep for reference.
couplings = np.linspace(0.0, 1.0, 8)
speeds = np.linspace(1.0, 20.0, 8)
landscape = np.array([[optimizee.fitness(g, v) for v in speeds] for g in couplings])
i, j = np.unravel_index(landscape.argmax(), landscape.shape)
print(f"8 x 8 sweep: best {landscape.max():.4f} at coupling {couplings[i]:.3f}, speed {speeds[j]:.2f}")

# %%
# Two batches of a 3 x 3 grid plus their incumbents make a population of 20.
cfg = RunConfig(run_name="mga", optimizee="fc_match", optimizer="mga",
                optimizer_params={"n_batches": 2, "points_per_axis": 3, "initial_width": 0.4, "shrink": 0.9},
                population_size=20, generations=15, seed=0, worst_fitness=-1e9,
                results_root=tempfile.mkdtemp(prefix="twoloop-fc-"))
traj = run_generation_loop(cfg, *cfg.build())
for record in traj:
    best = max(record.entries, key=lambda e: e.weighted_fitness)
    p = best.individual.as_dict()
    print(f"generation {record.generation:2d}  best {best.weighted_fitness:.4f}  "
          f"coupling {p['coupling'][0]:.3f}  speed {p['speed'][0]:.2f}")
