"""Desk-scale optimizees and their fitness functions."""

from .fitness import (
    ClassifierTask,
    ColonyEventLog,
    NetworkTask,
    TraceTask,
    analytic_function,
    colony_fitness,
    fc_sc_fitness,
    functional_connectivity,
    mse_fitness,
    simulate_network,
    softmax,
    sp_fitness_microcircuit,
    sp_fitness_two_pop,
    spike_count_fitness,
    trace_fitness,
)
from .mountain_car import mountain_car_episode
from .optimizees import (
    OPTIMIZEES,
    AnalyticOptimizee,
    ClassifierOptimizee,
    ExternalOptimizee,
    FcMatchOptimizee,
    MountainCarOptimizee,
    TraceFitOptimizee,
    make_optimizee,
)
