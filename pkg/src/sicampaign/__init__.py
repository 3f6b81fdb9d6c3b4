"""Optimal campaigning for SI information epidemics on degree-heterogeneous networks."""
from .degree_model import (
    DegreeDistribution,
    GroupPartition,
    NeighborDistributions,
    derive_neighbor_distributions,
    group_mean_degrees,
    make_power_law,
    make_truncated_poisson,
    named_network,
    partition_equal_mass,
)
from .dynamics import (
    ControlSchedule,
    ModelParams,
    Network,
    SpreadingProfile,
    Trajectory,
    budget_spend,
    integrate_heun,
    objective,
    rhs,
    time_grid,
)
from .strategies import InfeasibleBudget, bang_bang_strategy, no_control, static_strategy
from .transcription_optimizer import (
    NlpProblem,
    OptimalSolution,
    SolverOptions,
    resource_allocation_rates,
    solve,
    transcribe,
)

__version__ = "0.1.0"
