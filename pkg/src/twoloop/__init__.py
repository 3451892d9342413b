"""Two-loop black-box parameter optimization.

An outer loop of population-based optimizers proposes parameter sets
(individuals); an inner loop evaluates each one independently, in parallel,
natively or through an external simulator.
"""

from .core import (
    Bounds,
    Entry,
    Evaluation,
    GenerationRecord,
    Individual,
    ParameterBounds,
    Trajectory,
    best_entry,
    clip_individual,
    weight_fitness,
)
from .config import RunConfig, load_config
from .engine import Optimizee, run_generation_loop
from .errors import (
    CheckpointError,
    ConfigurationError,
    EmptyTrajectoryError,
    EvaluationError,
    OptimizerStepError,
)

__version__ = "0.1.0"
