"""
Fitting a damped oscillator to a reference trace
================================================

The model is driven by a step stimulus and its membrane-like trace is compared
with a reference produced by hidden parameters. A genetic algorithm with a
population of 100 recovers them within a few generations.
"""

# %%
import tempfile

import numpy as np

from twoloop.config import RunConfig
from twoloop.core import best_entry
from twoloop.engine import run_generation_loop

cfg = RunConfig(run_name="trace", optimizee="trace_fit", optimizer="ga", population_size=100, generations=10,
                seed=0, worst_fitness=-1e9, results_root=tempfile.mkdtemp(prefix="twoloop-trace-"))
optimizee, optimizer = cfg.build()
print("free parameters:", optimizee.bounds)

# %%
traj = run_generation_loop(cfg, optimizee, optimizer)
for record in traj:
    print(f"generation {record.generation}  best loss {-record.ok_fitnesses().max():.5f}")

# %%
ind, fitness, generation = best_entry(traj)
print("best parameters:", {k: np.round(v, 4).tolist() for k, v in ind.as_dict().items()})
