"""Coalescent likelihood estimation by backward importance sampling with early stopping."""

from .errors import *  # noqa: F401,F403
from .estimator import (
    Estimate,
    EstimateRequest,
    GridResult,
    GridRow,
    aggregate_log_likelihood,
    estimate,
    grid_sweep,
    mu_grid,
    relative_sd,
)
from .model import (
    Configuration,
    LocusSpec,
    MutationModel,
    build_multilocus_model,
    forward_transition_probability,
    load_model,
    sample_coalescent_data,
    sample_initial_data,
    stationary_distribution,
)
from .oracle import (
    LevelDistribution,
    OracleLimits,
    enumerate_configurations,
    exact_biased_likelihood,
    exact_last_exit_marginal,
    exact_likelihood,
    pim_sample_distribution,
    proposal_expectation,
    split_moment_distribution,
    tv_contraction_profile,
)
from .rng import CounterStream
from .simulator import (
    AncestralEvent,
    ReplicateResult,
    SimulationSettings,
    ancestor_event_distribution,
    apply_event,
    event_weight,
    final_stage_sd,
    importance_weight,
    log_bias_correction,
    run_replicate,
    sample_offspring_type,
)

__version__ = "0.1.0"
