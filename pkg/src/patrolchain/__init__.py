"""Stochastic surveillance strategies: Markov-chain patrolling on graphs."""
from ._backend import BACKEND
from .chaincore import (
    ReducibleChainError,
    ValidationReport,
    is_irreducible,
    is_reversible,
    metropolis_hastings,
    random_walk,
    stationary_distribution,
    validate,
)
from .entropy import MaxentropicSolution, entropy_rate, maximize_entropy_rate
from .graphmodel import SurveillanceGraph, load_graph, make_grid, save_graph, sf_dataset, uniform_pi
from .hitting import (
    mean_travel_time,
    kemeny_constant,
    mean_hitting_times,
    meeting_times,
    team_hitting_times,
    weighted_mean_hitting_times,
)
from .optimize import (
    InfeasibleError,
    ProjectionError,
    FeasibleSpec,
    OptimizeResult,
    maximize_return_entropy,
    minimize_mean_hitting,
    minimize_mean_hitting_reversible,
    minimize_meeting_time,
    minimize_weighted_mean_hitting,
    project,
)
from .returntime import (
    return_time_distribution,
    return_time_entropy,
    return_time_entropy_gradient,
    truncation_horizon,
)

from .sim import empirical_meeting, empirical_return_histogram, empirical_visit_frequency, simulate

__version__ = "0.1.0"
