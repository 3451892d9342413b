"""
Ensemble Kalman inversion on a softmax classifier
=================================================

The ensemble Kalman optimizer does not look at the scalar fitness to move the
ensemble; it uses the model outputs (the class probabilities) and the one-hot
labels as the observation target.
"""

# %%
import tempfile

import numpy as np

from twoloop.benchmarks import ClassifierOptimizee
from twoloop.config import RunConfig
from twoloop.engine import run_generation_loop
from twoloop.optimizers import enkf_update

# %%
# One update by hand: four parameters, an ensemble of six and two outputs
# that depend linearly on the parameters.
rng = np.random.default_rng(1)
ensemble = rng.normal(size=(4, 6))
forward = rng.normal(size=(2, 4))
target = np.array([1.0, -1.0])
updated = enkf_update(ensemble, forward @ ensemble, target, gamma=0.1)
print("misfit before:", np.linalg.norm(forward @ ensemble - target[:, None]))
print("misfit after: ", np.linalg.norm(forward @ updated - target[:, None]))

# %%
# When every member already reproduces the target there is nothing to do.
print("zero innovation update:", np.abs(enkf_update(ensemble, np.repeat(target[:, None], 6, 1), target, 0.1)
                                        - ensemble).max())

# %%
# The same update drives a whole run on three Gaussian blobs.
task = ClassifierOptimizee().task
print("samples", task.features.shape[0], "features", task.n_features, "classes", task.n_classes)

cfg = RunConfig(run_name="enkf", optimizee="classifier", optimizer="enkf",
                optimizer_params={"gamma": 0.5, "replace_fraction": 0.1},
                population_size=32, generations=30, seed=0, worst_fitness=-1e9,
                results_root=tempfile.mkdtemp(prefix="twoloop-enkf-"))
traj = run_generation_loop(cfg, *cfg.build())
for record in traj.records[::5]:
    f = record.ok_fitnesses()
    print(f"generation {record.generation:2d}  mean {f.mean():7.4f}  best {f.max():.4f}")
