"""Significance-aware remote estimation of a two-state Markov source.

The sensor decides each slot whether to send a fresh sample over an
unreliable channel.  Errors are split into missed alarms (source in 1,
estimate 0) and false alarms (source in 0, estimate 1), each with its own
age and weight.  The package evaluates switching and age-agnostic policies
in closed form, finds the best switching policy, solves the truncated MDP
by relative value iteration and cross-checks everything by simulation.
"""

from .analytic import (
    PolicyMetrics,
    RandomizedPolicy,
    StationaryDistribution,
    SwitchingPolicy,
    occupancy_rate,
    randomized_metrics,
    randomized_stationary,
    switching_metrics,
    switching_stationary,
    truncated_metrics,
    truncated_stationary,
    truncation_gap,
)
from .mdp import build_truncated_mdp, check_switching_structure, rvi_solve
from .model import FalseAlarm, MissedAlarm, ModelParams, Synced, transition_kernel
from .search import algorithm1, exhaustive_search, slice_turn_point, symmetric_search
from .simulator import SimConfig, kl_policy_distance, performance_gap, simulate

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "Synced",
    "MissedAlarm",
    "FalseAlarm",
    "transition_kernel",
    "SwitchingPolicy",
    "RandomizedPolicy",
    "PolicyMetrics",
    "StationaryDistribution",
    "switching_metrics",
    "switching_stationary",
    "randomized_metrics",
    "randomized_stationary",
    "truncated_metrics",
    "truncated_stationary",
    "truncation_gap",
    "occupancy_rate",
    "build_truncated_mdp",
    "rvi_solve",
    "check_switching_structure",
    "algorithm1",
    "symmetric_search",
    "exhaustive_search",
    "slice_turn_point",
    "SimConfig",
    "simulate",
    "performance_gap",
    "kl_policy_distance",
]
