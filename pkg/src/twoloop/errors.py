"""Exception hierarchy shared across the package."""


class TwoLoopError(Exception):
    """Base class for all errors raised by twoloop."""


class ConfigurationError(TwoLoopError, ValueError):
    """Invalid parameters, bounds, weights or run configuration."""


class EvaluationError(TwoLoopError):
    """An individual could not be evaluated (non-finite fitness, diverged simulation, bad output file)."""


class EmptyTrajectoryError(TwoLoopError):
    """The trajectory holds no successfully evaluated entry."""


class OptimizerStepError(TwoLoopError):
    """An optimizer could not produce a new population from the evaluated one."""


class CheckpointError(TwoLoopError):
    """A checkpoint is missing, unreadable or inconsistent with the trajectory."""
